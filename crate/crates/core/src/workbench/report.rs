use std::path::Path;

use crate::error::Result;
use crate::lips::HtEstimate;
use crate::model::ModelVector;

/// C-style `%.10g`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{x:.9e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..10).contains(&e) {
        let sign = if e < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mant), e.abs())
    } else {
        trim(&format!("{:.*}", (9 - e) as usize, x))
    }
}

/// `variable,pip,se,ess`.
pub fn write_pips(path: &Path, names: &[String], estimates: &[HtEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variable", "pip", "se", "ess"])?;
    for (name, e) in names.iter().zip(estimates) {
        w.write_record([name.clone(), fmt_g(e.value), fmt_g(e.se), fmt_g(e.ess)])?;
    }
    w.flush()?;
    Ok(())
}

/// `row,mean,se` with 1-based rows.
pub fn write_predictions(path: &Path, estimates: &[HtEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "mean", "se"])?;
    for (i, e) in estimates.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt_g(e.value), fmt_g(e.se)])?;
    }
    w.flush()?;
    Ok(())
}

/// `model,log_bf0,prior,posterior`, models as 0/1 strings in canonical order.
pub fn write_posterior_table(
    path: &Path,
    p: usize,
    masks: &[usize],
    log_bf0: &[f64],
    prior: &[f64],
    posterior: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model", "log_bf0", "prior", "posterior"])?;
    for &m in masks {
        w.write_record([
            ModelVector::from_mask(p, m).to_string(),
            fmt_g(log_bf0[m]),
            fmt_g(prior[m]),
            fmt_g(posterior[m]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf() {
        let cases = [
            (1.0, "1"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.3333333333"),
            (123456.789, "123456.789"),
            (1e-5, "1e-05"),
            (1.5e-7, "1.5e-07"),
            (0.0001234, "0.0001234"),
            (12345678901.0, "1.23456789e+10"),
            (9999999999.5, "1e+10"),
            (-2.5, "-2.5"),
            (100.0, "100"),
            (1e300, "1e+300"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
        assert_eq!(fmt_g(f64::INFINITY), "inf");
        assert_eq!(fmt_g(0.0), "0");
    }
}
