//! Obreshkov multi-derivative one-step integration of linear
//! differential-algebraic systems `C x' + G x = b(t)`.

pub mod coefficients;
pub mod dae;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod netlist;
pub mod order_lab;
pub mod pencil;
pub mod steady_state;

pub use coefficients::ObreshkovScheme;
pub use dae::{builtin_system, BenchmarkSystem, BuiltinKind, LinearDae, Sinusoid};
pub use error::{DaeError, IntegratorError, NetlistError, OrderError, PencilError, SchemeError, SteadyStateError};
pub use integrator::{march, step, StepState, Stepper};
pub use order_lab::{run_study, OrderStudyReport, StudyOptions};
pub use pencil::{weierstrass, PencilOptions, WeierstrassDecomposition};
pub use steady_state::{ac_solve, PhasorSolution};
