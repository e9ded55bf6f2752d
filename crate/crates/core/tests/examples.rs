//! Every example runs to completion.

macro_rules! example {
    ($name:ident, $path:literal) => {
        #[allow(dead_code)]
        #[path = $path]
        mod $name;

        #[test]
        fn $name() {
            $name::run_example().expect(concat!(stringify!($name), " should run"));
        }
    };
}

example!(equilibrium_sampling, "../examples/equilibrium_sampling.rs");
example!(trajectory, "../examples/trajectory.rs");
example!(mixing_scaling, "../examples/mixing_scaling.rs");
example!(spectral_gap, "../examples/spectral_gap.rs");
example!(fronts, "../examples/fronts.rs");
example!(experiment, "../examples/experiment.rs");
example!(renewal_asymptotics, "../examples/renewal_asymptotics.rs");
