//! Scheme-independent reference values.

mod adams;
mod fourier;
mod heston;
mod mittag_leffler;
mod ou;

pub use adams::{FractionalAdams, RiccatiSolution};
pub use fourier::{black_scholes_call, lewis_call};
pub use heston::{
    heston_call_fourier, heston_charfn, heston_charfn_complex, HestonParams, RiccatiDrift,
};
pub use mittag_leffler::{mittag_leffler_e, MittagLefflerSeries};
pub use ou::{gaussian_call, ou_call_price, ou_terminal_moments};
