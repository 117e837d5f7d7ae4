//! Text formats: every float is written with 17 significant digits so that
//! files round-trip exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{SweepResult, SweepRow, SWEEP_COLUMNS};
use crate::error::{Error, Result};
use crate::field::{Boundary, Field2D, GridSpec, Stencil};
use crate::ground_state::RadialProfile;

/// `{:.16e}`; non-finite values print as `NaN`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Pretty JSON whose floats carry 17 significant digits. Non-finite floats
/// become `null`.
struct FullPrecision(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FullPrecision(serde_json::ser::PrettyFormatter::new()),
    );
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected columns {}, found {}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub fn write_sweep_csv(sweep: &SweepResult) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for r in &sweep.rows {
        let floats = [
            r.b,
            r.energy,
            r.theta,
            r.l4,
            r.v_integral,
            r.mu,
            r.z_x,
            r.z_y,
            r.eps_meas,
            r.eps_theory,
            r.l2_dist,
            r.h1_dist,
        ];
        let mut cells: Vec<String> = floats.iter().map(|&x| fmt_f64(x)).collect();
        cells.push(r.iters.to_string());
        cells.push(r.converged.to_string());
        cells.push(r.resolution_ok.to_string());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn read_sweep_csv(text: &str) -> Result<SweepResult> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &SWEEP_COLUMNS)?;
    let rows = rdr
        .deserialize::<SweepRow>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Parse(format!("sweep row {}: {e}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::from_rows(rows))
}

/// Metadata written next to a field snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    /// Half-width of the square.
    #[serde(rename = "L")]
    pub l: f64,
    pub n: usize,
    pub h: f64,
    pub boundary: Boundary,
    pub center: [f64; 2],
    pub stencil: Stencil,
}

impl FieldSidecar {
    pub fn of(grid: &GridSpec) -> Self {
        Self {
            l: grid.half_width,
            n: grid.n,
            h: grid.spacing(),
            boundary: grid.boundary,
            center: grid.center,
            stencil: grid.stencil,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = GridSpec {
            half_width: self.l,
            n: self.n,
            center: self.center,
            stencil: self.stencil,
            boundary: self.boundary,
        };
        g.validate()?;
        if ((g.spacing() - self.h) / self.h).abs() > 1e-12 {
            return Err(Error::Parse(format!(
                "sidecar spacing {} does not match L = {} and n = {}",
                self.h, self.l, self.n
            )));
        }
        Ok(g)
    }
}

/// `n` lines of `n` values; line `j` holds row `y_j`.
pub fn write_field_csv(u: &Field2D) -> (String, String) {
    let n = u.grid().n;
    let mut out = String::with_capacity(n * n * 24);
    for row in u.values().chunks(n) {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let sidecar = to_json(&FieldSidecar::of(u.grid())).expect("sidecar serializes");
    (out, sidecar)
}

pub fn read_field_csv(values: &str, sidecar: &str) -> Result<Field2D> {
    let grid = from_json::<FieldSidecar>(sidecar)?.grid()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(values.as_bytes());
    let mut data = Vec::with_capacity(grid.len());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != grid.n {
            return Err(Error::Parse(format!(
                "field row has {} values, expected {}",
                rec.len(),
                grid.n
            )));
        }
        for cell in rec.iter() {
            data.push(
                cell.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{cell:?}: {e}")))?,
            );
        }
    }
    Field2D::from_values(grid, data)
}

pub const Q_COLUMNS: [&str; 3] = ["r", "q", "dq"];

pub fn write_q_csv(profile: &RadialProfile) -> String {
    let mut out = Q_COLUMNS.join(",");
    out.push('\n');
    for ((r, q), dq) in profile
        .r_grid()
        .iter()
        .zip(profile.q_values())
        .zip(profile.dq_values())
    {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(*r),
            fmt_f64(*q),
            fmt_f64(*dq)
        ));
    }
    out
}

pub fn read_q_csv(text: &str) -> Result<RadialProfile> {
    #[derive(Deserialize)]
    struct Row {
        r: f64,
        q: f64,
        dq: f64,
    }
    let mut rdr = reader(text);
    check_header(&mut rdr, &Q_COLUMNS)?;
    let (mut r, mut q, mut dq) = (Vec::new(), Vec::new(), Vec::new());
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        r.push(row.r);
        q.push(row.q);
        dq.push(row.dq);
    }
    RadialProfile::from_samples(&r, &q, &dq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::GroundState;

    #[test]
    fn floats_round_trip_with_17_digits() {
        for x in [0.1, -2.5, 1.0 / 3.0, 6.02214076e23, 5e-324, f64::MAX] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
        let j = to_json(&serde_json::json!({"x": 0.1, "y": f64::NAN})).unwrap();
        assert!(j.contains("1.0000000000000001e-1"));
        assert!(j.contains("null"));
    }

    fn row(b: f64) -> SweepRow {
        SweepRow {
            b,
            energy: -1.0 / (4.0 * b) + 1e-3,
            theta: 1.0 / b,
            l4: 2.0 / (11.7 * b),
            v_integral: 0.3 * b,
            mu: -2.0 / b,
            z_x: 1e-5,
            z_y: -3e-6,
            eps_meas: b.sqrt(),
            eps_theory: b.sqrt(),
            l2_dist: f64::NAN,
            h1_dist: 0.02,
            iters: 17,
            converged: true,
            resolution_ok: false,
        }
    }

    #[test]
    fn sweep_csv_round_trip() {
        let s = SweepResult::from_rows(vec![row(0.1), row(0.2), row(0.05)]);
        let text = write_sweep_csv(&s);
        assert!(text.starts_with("b,energy,theta,l4,v_integral,mu,z_x,z_y,eps_meas,eps_theory,l2_dist,h1_dist,iters,converged,resolution_ok\n"));
        let back = read_sweep_csv(&text).unwrap();
        assert_eq!(back.rows.len(), 3);
        for (a, b) in back.rows.iter().zip(&s.rows) {
            assert_eq!(a.b, b.b);
            assert_eq!(a.energy, b.energy);
            assert!(a.l2_dist.is_nan());
            assert_eq!(a.iters, b.iters);
            assert_eq!(a.resolution_ok, b.resolution_ok);
        }
        assert_eq!(write_sweep_csv(&back), text);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(matches!(
            read_sweep_csv("b,energy\n0.1,1\n"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn field_round_trip() {
        let grid = GridSpec::centered(3.0, 40, [0.5, -1.0]).unwrap();
        let u = Field2D::from_fn(grid, |x, y| (-(x * x + 2.0 * y * y)).exp() / 3.0);
        let (values, sidecar) = write_field_csv(&u);
        let meta: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
        for k in ["L", "n", "h", "boundary"] {
            assert!(meta.get(k).is_some(), "{k}");
        }
        let back = read_field_csv(&values, &sidecar).unwrap();
        assert_eq!(back.values(), u.values());
        assert_eq!(back.grid(), u.grid());
    }

    #[test]
    fn q_profile_round_trip() {
        let gs = GroundState::reference();
        let text = write_q_csv(&gs.profile);
        assert!(text.starts_with("r,q,dq\n"));
        let back = read_q_csv(&text).unwrap();
        assert_eq!(back.q_values(), gs.profile.q_values());
        assert_eq!(back.value(1.234), gs.profile.value(1.234));
    }
}
