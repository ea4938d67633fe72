use nalgebra::RealField;

/// Real scalar usable by the array and geometry layers.
pub trait Real: RealField + Copy {
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    fn to_f64(self) -> f64 {
        nalgebra::try_convert(self).unwrap_or(f64::NAN)
    }

    fn is_finite_value(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl<T: RealField + Copy> Real for T {}
