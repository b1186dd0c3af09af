//! Spectral analysis of second-order differential operators
//! -(p y')' + q y = lambda delta y on an interval [a, b) whose weight
//! delta >= 0 may vanish on subintervals, with a boundary condition at b
//! that depends analytically on the spectral parameter through a pair of
//! real entire functions (C0, C1) forming a Nevanlinna pair.
//!
//! The library builds the characteristic function m = Phi / Psi of the
//! problem, locates its poles (the eigenvalues), computes the residues and
//! the resulting discrete spectral function, and evaluates eigenfunction
//! expansions with convergence diagnostics.
//!
//! Module map:
//! - [`expr`]: tiny expression language for coefficients and boundary pairs
//! - [`ode`]: adaptive Runge-Kutta integration with dense output
//! - [`quad`]: adaptive Gauss-Kronrod quadrature for complex integrands
//! - [`problem`]: problem container, validation, fundamental solutions
//! - [`nevpair`]: entire Nevanlinna pairs, validation, case classification
//! - [`characteristic`]: the (Phi, Psi) pair and m = Phi/Psi
//! - [`spectrum`]: eigenvalue scan, residues, discrete spectral function

pub mod characteristic;
pub mod expansion;
pub mod expr;
pub mod nevpair;
pub mod ode;
pub mod oracle;
pub mod problem;
pub mod quad;
pub mod spectrum;

pub use characteristic::{CharMode, CharacteristicPair};
pub use expansion::{
    eigenfunction_term, expansion_terms, fourier_coefficient, l2_report, partial_sum,
    uniform_report, EligibilityReport, ExpansionTerm, L2Report, L2Row, TargetFunction,
    UniformReport, UniformRow,
};
pub use spectrum::{find_eigenvalues, DiscreteSpectralFunction, Eigenvalue, ScanOptions};
pub use expr::Expr;
pub use nevpair::{Case, CaseClassification, ClassifyConfig, EntirePair, EtaRelation};
pub use problem::{Problem, Regularity, RightEndpoint, SlError, Tolerances, Trajectory};

pub type Complex64 = num_complex::Complex<f64>;
