//! Post-processing of run logs: RMSE, Butterworth low-pass filtering and
//! the summary printed by `omnimanip analyze --report`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Complex;

use crate::log::RunLog;
use crate::HarnessError;

/// Root-mean-square of `series − reference`.
pub fn rmse(series: &[f64], reference: &[f64]) -> Result<f64, HarnessError> {
    if series.len() != reference.len() {
        return Err(HarnessError::LengthMismatch { left: series.len(), right: reference.len() });
    }
    if series.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = series.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / series.len() as f64).sqrt())
}

/// Per-axis RMSE of multi-axis samples.
pub fn rmse_axes<const N: usize>(series: &[[f64; N]], reference: &[[f64; N]]) -> Result<[f64; N], HarnessError> {
    if series.len() != reference.len() {
        return Err(HarnessError::LengthMismatch { left: series.len(), right: reference.len() });
    }
    let mut out = [0.0; N];
    for (i, o) in out.iter_mut().enumerate() {
        let a: Vec<f64> = series.iter().map(|s| s[i]).collect();
        let b: Vec<f64> = reference.iter().map(|s| s[i]).collect();
        *o = rmse(&a, &b)?;
    }
    Ok(out)
}

/// Second-order section `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`,
/// run in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
    s: [f64; 2],
}

impl Biquad {
    fn normalized(b: [f64; 3], a: [f64; 3]) -> Self {
        Self { b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]], a: [a[1] / a[0], a[2] / a[0]], s: [0.0; 2] }
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s[0];
        self.s[0] = self.b[1] * x - self.a[0] * y + self.s[1];
        self.s[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    fn response(&self, z_inv: Complex<f64>) -> Complex<f64> {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = 1.0 + z_inv * (self.a[0] + z_inv * self.a[1]);
        num / den
    }
}

/// Digital Butterworth low-pass from the bilinear transform with the
/// cutoff pre-warped, as a cascade of sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    sections: Vec<Biquad>,
    rate: f64,
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff: f64, rate: f64) -> Result<Self, HarnessError> {
        if order == 0 || !(cutoff > 0.0) || !(rate > 2.0 * cutoff) {
            return Err(HarnessError::Config(format!(
                "Butterworth needs order ≥ 1 and 0 < cutoff < rate/2 (order {order}, cutoff {cutoff}, rate {rate})"
            )));
        }
        let k = 2.0 * rate;
        let wc = k * (PI * cutoff / rate).tan();
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for i in 0..order / 2 {
            let theta = PI * (2 * i + order + 1) as f64 / (2 * order) as f64;
            let re = wc * theta.cos();
            let mag2 = wc * wc;
            let a = [k * k - 2.0 * re * k + mag2, -2.0 * k * k + 2.0 * mag2, k * k + 2.0 * re * k + mag2];
            sections.push(Biquad::normalized([mag2, 2.0 * mag2, mag2], a));
        }
        if order % 2 == 1 {
            sections.push(Biquad::normalized([wc, wc, 0.0], [k + wc, wc - k, 0.0]));
        }
        Ok(Self { sections, rate })
    }

    pub fn order(&self) -> usize {
        self.sections.iter().map(|s| if s.b[2] == 0.0 && s.a[1] == 0.0 { 1 } else { 2 }).sum()
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn process(&mut self, x: f64) -> f64 {
        self.sections.iter_mut().fold(x, |v, s| s.process(v))
    }

    pub fn reset(&mut self) {
        for s in &mut self.sections {
            s.s = [0.0; 2];
        }
    }

    /// |H| at `freq` Hz.
    pub fn magnitude(&self, freq: f64) -> f64 {
        let w = 2.0 * PI * freq / self.rate;
        let z_inv = Complex::new(w.cos(), -w.sin());
        self.sections.iter().map(|s| s.response(z_inv)).product::<Complex<f64>>().norm()
    }
}

/// Filters a whole series from zero initial conditions.
pub fn butterworth_lowpass(series: &[f64], order: usize, cutoff: f64, rate: f64) -> Result<Vec<f64>, HarnessError> {
    let mut f = Butterworth::lowpass(order, cutoff, rate)?;
    Ok(series.iter().map(|&x| f.process(x)).collect())
}

/// 10 %–90 % rise time of the excursion from the first sample to the
/// extreme value. `None` when the signal never moves.
pub fn rise_time(time: &[f64], series: &[f64]) -> Option<f64> {
    let first = *series.first()?;
    let (peak_idx, peak) = series
        .iter()
        .map(|v| v - first)
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
    if peak == 0.0 {
        return None;
    }
    let crosses = |frac: f64| series[..=peak_idx].iter().position(|v| (v - first) / peak >= frac);
    Some(time[crosses(0.9)?] - time[crosses(0.1)?])
}

/// Largest absolute deviation from the first sample, with its time.
pub fn peak_deviation(time: &[f64], series: &[f64]) -> Option<(f64, f64)> {
    let first = *series.first()?;
    series
        .iter()
        .enumerate()
        .map(|(i, v)| (time[i], (v - first).abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// Text report on a run log.
pub fn report(log: &RunLog) -> Result<String, HarnessError> {
    let time = log.require("time_s")?;
    let mut out = String::new();
    let n = time.len();
    let span = if n > 1 { time[n - 1] - time[0] } else { 0.0 };
    writeln!(out, "samples {n}, span {span:.3} s").unwrap();

    writeln!(out, "\nposition tracking (true vs set point)").unwrap();
    writeln!(out, "  axis   rmse [m]    peak dev [m]  at [s]   rise [s]").unwrap();
    for a in AXES {
        let p = log.require(&format!("true_pos_{a}_m"))?;
        let sp = log.require(&format!("sp_pos_{a}_m"))?;
        let e = rmse(&p, &sp)?;
        let (t_peak, peak) = peak_deviation(&time, &p).unwrap_or((0.0, 0.0));
        let rise = rise_time(&time, &p).map_or("-".to_string(), |r| format!("{r:.3}"));
        writeln!(out, "  {a}      {e:<10.5}  {peak:<12.5}  {t_peak:<7.3}  {rise}").unwrap();
    }
    let att = log.require("err_att_rad")?;
    let att_max = att.iter().cloned().fold(0.0, f64::max);
    writeln!(out, "  attitude error rmse {:.5} rad, max {att_max:.5} rad", rmse(&att, &vec![0.0; n])?).unwrap();

    writeln!(out, "\nexternal wrench estimate (estimate vs true, body frame)").unwrap();
    writeln!(out, "  axis   rmse        true peak   rise [s]").unwrap();
    for (kind, unit) in [("force", "N"), ("torque", "Nm")] {
        for a in AXES {
            let est = log.require(&format!("est_{kind}_{a}_{unit}"))?;
            let truth = log.require(&format!("ext_{kind}_{a}_{unit}"))?;
            let e = rmse(&est, &truth)?;
            let peak = truth.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let rise = rise_time(&time, &est).filter(|_| peak > 0.5).map_or("-".to_string(), |r| format!("{r:.3}"));
            writeln!(out, "  {kind:<6} {a}  {e:<10.4}  {peak:<10.3}  {rise}").unwrap();
        }
    }

    let sensor = log.require("sensor_filtered_N")?;
    if sensor.iter().any(|v| *v != 0.0) {
        let est = log.require("est_sensor_axis_N")?;
        let contact: Vec<usize> = (0..n).filter(|&i| sensor[i] > 0.5).collect();
        let a: Vec<f64> = contact.iter().map(|&i| est[i]).collect();
        let b: Vec<f64> = contact.iter().map(|&i| sensor[i]).collect();
        writeln!(out, "\nforce sensor").unwrap();
        writeln!(out, "  estimate vs filtered sensor rmse {:.4} N over {} samples in contact", rmse(&a, &b)?, contact.len())
            .unwrap();
    }

    let sat = log.require("saturated")?;
    let sat_count = sat.iter().filter(|v| **v != 0.0).count();
    writeln!(out, "\nsaturated control ticks: {sat_count}").unwrap();
    Ok(out)
}
