use core::fmt;
use core::str::FromStr;

use crate::error::Error;

/// A kernel weight function of a scaled distance `u = x / h`.
pub trait KernelFn {
    fn weight(&self, u: f64) -> f64;
}

/// Second-order kernels supported on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Kernel {
    #[default]
    Triangular,
    Epanechnikov,
    Uniform,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Triangular, Kernel::Epanechnikov, Kernel::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Triangular => "triangular",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Uniform => "uniform",
        }
    }
}

impl KernelFn for Kernel {
    fn weight(&self, u: f64) -> f64 {
        let a = u.abs();
        if a > 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Triangular => 1.0 - a,
            Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
            Kernel::Uniform => 0.5,
        }
    }
}

impl<K: KernelFn + ?Sized> KernelFn for &K {
    fn weight(&self, u: f64) -> f64 {
        (**self).weight(u)
    }
}

/// A kernel multiplied by a positive constant. Local polynomial estimates are
/// invariant to this rescaling.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<K>(pub K, pub f64);

impl<K: KernelFn> KernelFn for Scaled<K> {
    fn weight(&self, u: f64) -> f64 {
        self.1 * self.0.weight(u)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "triangular" | "tri" => Ok(Kernel::Triangular),
            "epanechnikov" | "epa" => Ok(Kernel::Epanechnikov),
            "uniform" | "uni" => Ok(Kernel::Uniform),
            other => Err(Error::InvalidSpec(alloc::format!("unknown kernel {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_at_reference_points() {
        assert_eq!(Kernel::Triangular.weight(0.5), 0.5);
        assert_eq!(Kernel::Epanechnikov.weight(0.0), 0.75);
        assert_eq!(Kernel::Uniform.weight(-0.3), 0.5);
        for k in Kernel::ALL {
            assert_eq!(k.weight(1.2), 0.0);
            assert_eq!(k.weight(-1.2), 0.0);
        }
    }

    #[test]
    fn symmetric_and_nonnegative() {
        for k in Kernel::ALL {
            for i in 0..=300 {
                let u = -1.5 + i as f64 * 0.01;
                let w = k.weight(u);
                assert!(w >= 0.0);
                assert_eq!(w, k.weight(-u));
            }
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("Epanechnikov".parse::<Kernel>().unwrap(), Kernel::Epanechnikov);
        assert!("gaussian".parse::<Kernel>().is_err());
    }
}
