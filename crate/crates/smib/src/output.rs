//! File formats: JSON with 17 significant digits, trajectory and basin CSV.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use smib_core::simulator::BasinCase;
use smib_core::Trajectory;

/// Pretty-printed JSON that writes every `f64` as `{:.16e}`.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value.into())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with 17 significant digits per float.
/// Non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    theta: f64,
    omega: f64,
    #[serde(rename = "re_I")]
    re_i: f64,
    #[serde(rename = "im_I")]
    im_i: f64,
    #[serde(rename = "S")]
    storage: Option<f64>,
}

/// Writes `t, theta, omega, re_I, im_I, S`. `S` is empty when the
/// trajectory carries no storage record.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for k in 0..traj.len() {
        let x = &traj.states[k];
        w.serialize(TrajectoryRow {
            t: traj.times[k],
            theta: x.theta,
            omega: x.omega,
            re_i: x.current.re,
            im_i: x.current.im,
            storage: traj.storage.get(k).copied(),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BasinRow {
    phi0: f64,
    domega0: f64,
    re_z0: f64,
    im_z0: f64,
    in_sublevel: bool,
    converged: bool,
    final_distance: f64,
}

/// Writes one row per simulated initial condition.
pub fn write_basin_csv(path: &Path, cases: &[BasinCase]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if cases.is_empty() {
        w.write_record([
            "phi0",
            "domega0",
            "re_z0",
            "im_z0",
            "in_sublevel",
            "converged",
            "final_distance",
        ])?;
    }
    for c in cases {
        w.serialize(BasinRow {
            phi0: c.initial.phi,
            domega0: c.initial.domega,
            re_z0: c.initial.re_z,
            im_z0: c.initial.im_z,
            in_sublevel: c.in_sublevel,
            converged: c.converged,
            final_distance: c.final_distance,
        })?;
    }
    w.flush()?;
    Ok(())
}
