pub mod berezin;
pub mod coherent_family;
pub mod egorov;
pub mod error;
pub mod fd;
pub mod fit;
pub mod jet;
pub mod quad;
pub mod specfun;
pub mod stationary_phase;
pub mod sphere_geom;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use berezin::{ExpansionReport, SymbolFunction};
pub use coherent_family::Params;
pub use fit::AsymptoticFit;
pub use specfun::SeriesControl;
pub use sphere_geom::{MultiIndex, QuadSpec, SpecialUnitary, SpherePoint};
