//! Unit-suffixed scalars such as `"70 kHz"` or `"25mK"`, converted to SI.

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Cyclic frequency, Hz.
    Frequency,
    Temperature,
    Length,
    Time,
    Mass,
    Intensity,
    Area,
    Angle,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Frequency => "a frequency",
            Kind::Temperature => "a temperature",
            Kind::Length => "a length",
            Kind::Time => "a time",
            Kind::Mass => "a mass",
            Kind::Intensity => "an intensity",
            Kind::Area => "an area",
            Kind::Angle => "an angle",
        }
    }

    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Kind::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9), ("THz", 1e12)],
            Kind::Temperature => &[("K", 1.0), ("mK", 1e-3), ("uK", 1e-6), ("µK", 1e-6), ("nK", 1e-9)],
            Kind::Length => &[("m", 1.0), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("µm", 1e-6), ("nm", 1e-9)],
            Kind::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9)],
            Kind::Mass => &[("kg", 1.0), ("u", ion_lattice::constants::ATOMIC_MASS_UNIT), ("Da", ion_lattice::constants::ATOMIC_MASS_UNIT)],
            Kind::Intensity => &[("W/m2", 1.0), ("W/m^2", 1.0), ("W/cm2", 1e4), ("W/cm^2", 1e4)],
            Kind::Area => &[("m2", 1.0), ("m^2", 1.0), ("cm2", 1e-4), ("cm^2", 1e-4), ("um2", 1e-12), ("um^2", 1e-12)],
            Kind::Angle => &[("rad", 1.0), ("deg", std::f64::consts::PI / 180.0)],
        }
    }

    pub fn unit_list(self) -> String {
        self.units().iter().map(|u| u.0).collect::<Vec<_>>().join(", ")
    }
}

/// Splits `"12.5e-3 mK"` into mantissa text, decimal exponent and the
/// (trimmed) suffix.
fn split_number(s: &str) -> Option<(&str, i32, &str)> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
        i += 1;
    }
    if i == digits_start {
        return None;
    }
    let mantissa_end = i;
    let mut exponent = 0;
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            exponent = s[mantissa_end + 1..j].parse().ok()?;
            i = j;
        }
    }
    s[..mantissa_end].parse::<f64>().ok()?;
    Some((&s[..mantissa_end], exponent, s[i..].trim()))
}

/// Parses `text` as a quantity of `kind`; `key` names the setting in errors.
pub fn parse(key: &str, text: &str, kind: Kind) -> Result<f64, CliError> {
    parse_with_default(key, text, kind, None)
}

/// As [`parse`], but a bare number is read in `default` units.
pub fn parse_with_default(key: &str, text: &str, kind: Kind, default: Option<&str>) -> Result<f64, CliError> {
    let text = text.trim();
    let Some((mantissa, exponent, suffix)) = split_number(text) else {
        return Err(CliError::config(format!("{key}: `{text}` is not a number with a unit")));
    };
    let unit = if suffix.is_empty() {
        default.ok_or_else(|| {
            CliError::config(format!("{key}: `{text}` needs a unit suffix ({})", kind.unit_list()))
        })?
    } else {
        suffix
    };
    let scale = kind.units().iter().find(|u| u.0 == unit).map(|u| u.1).ok_or_else(|| {
        CliError::config(format!("{key}: `{unit}` is not a unit of {} ({})", kind.name(), kind.unit_list()))
    })?;
    // Decimal prefixes shift the exponent so the result is correctly rounded.
    let shift = scale.log10().round();
    let value = if 10f64.powi(shift as i32) == scale {
        format!("{mantissa}e{}", exponent + shift as i32).parse::<f64>()
    } else {
        format!("{mantissa}e{exponent}").parse::<f64>().map(|v| v * scale)
    }
    .map_err(|_| CliError::config(format!("{key}: `{text}` is not a number")))?;
    if !value.is_finite() {
        return Err(CliError::config(format!("{key}: `{text}` is not finite")));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_suffixes() {
        assert_eq!(parse("a", "70 kHz", Kind::Frequency).unwrap(), 70e3);
        assert_eq!(parse("a", "25mK", Kind::Temperature).unwrap(), 25e-3);
        assert_eq!(parse("a", "-0.76 THz", Kind::Frequency).unwrap(), -0.76e12);
        assert_eq!(parse("a", "866.214 nm", Kind::Length).unwrap(), 866.214e-9);
        assert_eq!(parse("a", "2e-6 s", Kind::Time).unwrap(), 2e-6);
        assert_eq!(parse("a", "37 µm", Kind::Length).unwrap(), 37e-6);
        assert_eq!(parse_with_default("a", "5", Kind::Frequency, Some("MHz")).unwrap(), 5e6);
    }

    #[test]
    fn written_values_reparse() {
        use ion_lattice::format::csv;
        for si in [3.6e-3, 25e-3, 1.234_567_891_23e-4, 7.77e-9] {
            let back = parse("t", &format!("{} mK", csv(si * 1e3)), Kind::Temperature).unwrap();
            assert!((back / si - 1.0).abs() < 5e-9, "{si} {back}");
        }
        for si in [3.7e6, 0.105e6, 41_641.325_6] {
            let back = parse("f", &format!("{}MHz", csv(si * 1e-6)), Kind::Frequency).unwrap();
            assert!((back / si - 1.0).abs() < 5e-9);
        }
        for si in [-31.569_064e-6, 5.333_012_26e-6, 1.2e-17] {
            let back = parse("x", &format!("{} um", csv(si * 1e6)), Kind::Length).unwrap();
            assert!((back / si - 1.0).abs() < 5e-9);
        }
        // Nine significant digits survive exactly.
        assert_eq!(parse("t", &format!("{} mK", csv(3.6)), Kind::Temperature).unwrap(), 3.6e-3);
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse("trap.axial", "70", Kind::Frequency).unwrap_err().to_string();
        assert!(e.contains("trap.axial") && e.contains("unit"), "{e}");
        let e = parse("trap.axial", "70 kg", Kind::Frequency).unwrap_err().to_string();
        assert!(e.contains("trap.axial") && e.contains("kg"), "{e}");
        assert!(parse("x", "fast", Kind::Time).is_err());
    }
}
