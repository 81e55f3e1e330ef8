//! Configuration dumps: CSV rows of balls plus a JSON manifest.

use super::Configuration;
use crate::measures::RadiusMeasure;
use serde::Serialize;
use std::io::Write;

/// Writes `x1,…,xd,r` rows with a header.
pub fn write_csv<W: Write>(cfg: &Configuration, mut w: W) -> std::io::Result<()> {
    let header: Vec<String> = (1..=cfg.dim).map(|i| format!("x{i}")).chain(std::iter::once("r".into())).collect();
    writeln!(w, "{}", header.join(","))?;
    for (z, r) in cfg.iter() {
        let row: Vec<String> = z.iter().map(|v| v.to_string()).chain(std::iter::once(r.to_string())).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub seed: u64,
    pub lambda: f64,
    pub measure: &'a RadiusMeasure,
    pub window: &'a super::Window,
    pub centers: super::CenterPolicy,
    pub r_max: f64,
    pub truncation_tail: f64,
    pub balls: usize,
}

pub fn manifest<'a>(cfg: &'a Configuration, measure: &'a RadiusMeasure) -> Manifest<'a> {
    Manifest {
        seed: cfg.seed,
        lambda: cfg.lambda,
        measure,
        window: &cfg.window,
        centers: cfg.centers_policy,
        r_max: cfg.r_max,
        truncation_tail: cfg.truncation_tail,
        balls: cfg.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Window;

    #[test]
    fn csv_rows() {
        let cfg = Configuration::from_balls(Window::ball(2, 3.0), &[(vec![0.5, -1.0], 1.25)]);
        let mut buf = Vec::new();
        write_csv(&cfg, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x1,x2,r\n0.5,-1,1.25\n");
    }
}
