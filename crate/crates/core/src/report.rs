//! Frame output (surface OBJ) and per-frame statistics (CSV), plus the
//! end-of-run summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::SimError;
use crate::mesh::SimMesh;
use crate::optimizer::NewtonStats;
use crate::vecmath::Vec3;
use crate::Result;

fn io_err(path: &Path, source: std::io::Error) -> SimError {
    SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write the deformed surface as an OBJ file. All nodes are emitted so face
/// indices equal mesh node indices plus one.
pub fn write_obj(path: &Path, mesh: &SimMesh, x: &[Vec3]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let inner = (|| -> std::io::Result<()> {
        for p in x {
            writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
        }
        for t in &mesh.surface_tris {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        w.flush()
    })();
    inner.map_err(|e| io_err(path, e))
}

pub const CSV_HEADER: &str =
    "frame,wall_ms,newton_iters,pcg_iters_total,n_constraints_max,min_distance,sigma_final";

/// Streaming stats writer: fixed header, one row per completed frame.
pub struct StatsCsv {
    path: PathBuf,
    w: BufWriter<File>,
    /// With timings suppressed, identical runs produce identical bytes.
    pub suppress_timings: bool,
}

impl StatsCsv {
    pub fn create(path: &Path, suppress_timings: bool) -> Result<StatsCsv> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{CSV_HEADER}").map_err(|e| io_err(path, e))?;
        Ok(StatsCsv {
            path: path.to_path_buf(),
            w,
            suppress_timings,
        })
    }

    pub fn write_frame(&mut self, frame: usize, wall_ms: f64, stats: &NewtonStats) -> Result<()> {
        let ms = if self.suppress_timings { 0.0 } else { wall_ms };
        writeln!(
            self.w,
            "{},{},{},{},{},{},{}",
            frame,
            ms,
            stats.newton_iters(),
            stats.pcg_iters_total(),
            stats.n_constraints_max(),
            stats.min_distance,
            stats.sigma_final,
        )
        .map_err(|e| io_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| io_err(&self.path, e))
    }
}

/// Whole-run aggregates.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub frames_completed: usize,
    pub frames_requested: usize,
    pub success: bool,
    pub failure: Option<String>,
    pub total_newton: usize,
    pub total_pcg: usize,
    pub max_constraints: usize,
    pub min_distance_overall: f64,
    pub wall_ms_total: f64,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn record_frame(&mut self, stats: &NewtonStats, wall_ms: f64) {
        self.frames_completed += 1;
        self.total_newton += stats.newton_iters();
        self.total_pcg += stats.pcg_iters_total();
        self.max_constraints = self.max_constraints.max(stats.n_constraints_max());
        if self.frames_completed == 1 {
            self.min_distance_overall = stats.min_distance;
        } else {
            self.min_distance_overall = self.min_distance_overall.min(stats.min_distance);
        }
        self.wall_ms_total += wall_ms;
    }

    /// A run only reports success when every requested frame completed.
    pub fn finalize(&mut self) {
        self.success = self.failure.is_none() && self.frames_completed == self.frames_requested;
    }

    pub fn write(&self, path: &Path, suppress_timings: bool) -> Result<()> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(file);
        let inner = (|| -> std::io::Result<()> {
            writeln!(w, "status: {}", if self.success { "success" } else { "failed" })?;
            if let Some(msg) = &self.failure {
                writeln!(w, "failure: {msg}")?;
            }
            writeln!(w, "frames: {}/{}", self.frames_completed, self.frames_requested)?;
            writeln!(w, "newton_iters_total: {}", self.total_newton)?;
            writeln!(w, "pcg_iters_total: {}", self.total_pcg)?;
            writeln!(w, "max_constraints: {}", self.max_constraints)?;
            writeln!(w, "min_distance_overall: {}", self.min_distance_overall)?;
            if !suppress_timings {
                writeln!(w, "wall_ms_total: {}", self.wall_ms_total)?;
            }
            for note in &self.notes {
                writeln!(w, "note: {note}")?;
            }
            w.flush()
        })();
        inner.map_err(|e| io_err(path, e))
    }
}
