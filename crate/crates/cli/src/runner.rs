//! Frequency sweeps and spatial map scans.
//!
//! Work fans out over frequencies (and grid nodes) on the rayon pool; all
//! results are collected in index order before anything is written, so the
//! output bytes do not depend on the worker count.

use std::path::{Path, PathBuf};

use log::warn;
use psz_core::{
    averaged_perturbed, build_target_matrix, enclosed_area, extract_contours, ipi, ipi_map, izi, pressure_matching,
    scene_transfer_matrix, system_matrix, third_octave_smooth, ContourSet64, FilterMatrix64, IpiMap64,
    ListenerDisplacement, MetricSpectrum64, MetricValue64, PszError, RenderingMode, Scene64, TransferMatrix64,
    UncertaintyModel64, Zone, DESIGN_STREAM, EVALUATION_STREAM,
};
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::config::{DesignSource, ResolvedConfig};
use crate::output::{freq_label, json_pretty, write_file, Csv};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Numerical(#[from] PszError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// One evaluated configuration: rendering mode × listener case × filter design.
#[derive(Debug, Clone, PartialEq)]
pub struct Combo {
    pub mode: RenderingMode,
    /// `centered` or a listener-case name.
    pub case: String,
    pub design: DesignSource,
    pub displacement: Option<ListenerDisplacement<f64>>,
}

impl Combo {
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.mode.name(), self.case, self.design.name())
    }
}

/// All combinations a config asks for, in output order.
pub fn combos(cfg: &ResolvedConfig) -> Vec<Combo> {
    let mut out = Vec::new();
    for &mode in &cfg.modes {
        out.push(Combo { mode, case: "centered".into(), design: DesignSource::Centered, displacement: None });
        for case in &cfg.cases {
            for &design in &cfg.designs {
                out.push(Combo { mode, case: case.name.clone(), design, displacement: Some(case.displacement) });
            }
        }
    }
    out
}

/// The four isolation spectra of one combo, raw and 1/3-octave smoothed.
#[derive(Debug, Clone)]
pub struct ComboSpectra {
    pub combo: Combo,
    pub izi_a: MetricSpectrum64,
    pub izi_b: MetricSpectrum64,
    pub ipi_a: MetricSpectrum64,
    pub ipi_b: MetricSpectrum64,
    pub smoothed: [MetricSpectrum64; 4],
    /// Frequencies dropped because the filter solve failed.
    pub skipped: Vec<f64>,
    pub filters: Vec<FilterMatrix64>,
}

impl ComboSpectra {
    pub fn smoothed_izi_a(&self) -> &MetricSpectrum64 {
        &self.smoothed[0]
    }
    pub fn smoothed_izi_b(&self) -> &MetricSpectrum64 {
        &self.smoothed[1]
    }
    pub fn smoothed_ipi_a(&self) -> &MetricSpectrum64 {
        &self.smoothed[2]
    }
    pub fn smoothed_ipi_b(&self) -> &MetricSpectrum64 {
        &self.smoothed[3]
    }
}

/// `[IZI_A, IZI_B, IPI_A, IPI_B]` for a system matrix.
pub fn zone_metrics(
    scene: &Scene64,
    mode: RenderingMode,
    m: &psz_core::SystemMatrix64,
) -> Result<[MetricValue64; 4], PszError> {
    let (ka, kb) = (scene.zone_points(Zone::A), scene.zone_points(Zone::B));
    let ia = mode.program_channels(scene, Zone::A);
    let ib = mode.program_channels(scene, Zone::B);
    Ok([izi(m, ka, kb, &ia)?, izi(m, kb, ka, &ib)?, ipi(m, ka, &ia, &ib)?, ipi(m, kb, &ib, &ia)?])
}

/// Design and evaluation sets for one scene at one frequency.
struct TransferSets {
    design: TransferMatrix64,
    evaluation: TransferMatrix64,
}

fn transfer_sets(scene: &Scene64, f: f64, model: &UncertaintyModel64) -> Result<TransferSets, PszError> {
    let nominal = scene_transfer_matrix(scene, f)?;
    Ok(TransferSets {
        design: averaged_perturbed(&nominal, model, DESIGN_STREAM),
        evaluation: averaged_perturbed(&nominal, model, EVALUATION_STREAM),
    })
}

/// Filters for `scene` designed on its design set.
pub fn design_filters(
    scene: &Scene64,
    design: &TransferMatrix64,
    mode: RenderingMode,
    beta: f64,
) -> Result<FilterMatrix64, PszError> {
    let target = build_target_matrix(scene, design, mode)?;
    pressure_matching(design, &target, beta)
}

type FrequencyOutcome = Vec<Result<([MetricValue64; 4], FilterMatrix64), PszError>>;

fn evaluate_frequency(cfg: &ResolvedConfig, combos: &[Combo], f: f64) -> Result<FrequencyOutcome, PszError> {
    let beta = cfg.beta.at(f);
    let centered = &cfg.scene;
    let base = transfer_sets(centered, f, &cfg.uncertainty)?;
    let moved: Vec<(Scene64, TransferSets)> = cfg
        .cases
        .iter()
        .map(|c| {
            let s = centered.move_listener(&c.displacement);
            let sets = transfer_sets(&s, f, &cfg.uncertainty)?;
            Ok((s, sets))
        })
        .collect::<Result<_, PszError>>()?;

    let mut centered_filters: Vec<(RenderingMode, Result<FilterMatrix64, PszError>)> = Vec::new();
    let mut filters_for = |mode: RenderingMode| -> Result<FilterMatrix64, PszError> {
        if let Some((_, c)) = centered_filters.iter().find(|(m, _)| *m == mode) {
            return c.clone();
        }
        let c = design_filters(centered, &base.design, mode, beta);
        centered_filters.push((mode, c.clone()));
        c
    };

    let mut out = Vec::with_capacity(combos.len());
    for combo in combos {
        let result = (|| {
            let (scene, eval, c) = match &combo.displacement {
                None => (centered, &base.evaluation, filters_for(combo.mode)?),
                Some(_) => {
                    let idx = cfg.cases.iter().position(|c| c.name == combo.case).expect("known case");
                    let (s, sets) = &moved[idx];
                    let c = match combo.design {
                        DesignSource::Centered => filters_for(combo.mode)?,
                        DesignSource::Moved => design_filters(s, &sets.design, combo.mode, beta)?,
                    };
                    (s, &sets.evaluation, c)
                }
            };
            let m = system_matrix(eval, &c)?;
            Ok((zone_metrics(scene, combo.mode, &m)?, c))
        })();
        out.push(result);
    }
    Ok(out)
}

/// Runs every combo over the frequency grid, in memory.
pub fn compute_spectra(cfg: &ResolvedConfig) -> Result<Vec<ComboSpectra>, RunError> {
    let combos = combos(cfg);
    let per_freq: Vec<FrequencyOutcome> =
        cfg.frequencies.par_iter().map(|&f| evaluate_frequency(cfg, &combos, f)).collect::<Result<_, PszError>>()?;

    let mut out = Vec::with_capacity(combos.len());
    for (ci, combo) in combos.into_iter().enumerate() {
        let mut series: [Vec<MetricValue64>; 4] = Default::default();
        let mut skipped = Vec::new();
        let mut filters = Vec::new();
        for (fi, &f) in cfg.frequencies.iter().enumerate() {
            match &per_freq[fi][ci] {
                Ok((vals, c)) => {
                    for (s, v) in series.iter_mut().zip(vals) {
                        s.push(*v);
                    }
                    if cfg.source.export_filters {
                        filters.push(c.clone());
                    }
                }
                Err(e @ PszError::IllConditioned { .. }) => {
                    warn!("{}: skipping {f} Hz: {e}", combo.stem());
                    skipped.push(f);
                }
                Err(e) => return Err(e.clone().into()),
            }
        }
        let [a, b, c, d] = series;
        let izi_a = MetricSpectrum64::new("IZI_A", a)?;
        let izi_b = MetricSpectrum64::new("IZI_B", b)?;
        let ipi_a = MetricSpectrum64::new("IPI_A", c)?;
        let ipi_b = MetricSpectrum64::new("IPI_B", d)?;
        let smoothed = [
            third_octave_smooth(&izi_a),
            third_octave_smooth(&izi_b),
            third_octave_smooth(&ipi_a),
            third_octave_smooth(&ipi_b),
        ];
        out.push(ComboSpectra { combo, izi_a, izi_b, ipi_a, ipi_b, smoothed, skipped, filters });
    }
    Ok(out)
}

fn spectra_csv(s: &ComboSpectra) -> String {
    let mut csv = Csv::new(&[
        "frequency_hz",
        "izi_a_db",
        "izi_b_db",
        "ipi_a_db",
        "ipi_b_db",
        "izi_a_smoothed_db",
        "izi_b_smoothed_db",
        "ipi_a_smoothed_db",
        "ipi_b_smoothed_db",
    ]);
    let raw = [&s.izi_a, &s.izi_b, &s.ipi_a, &s.ipi_b];
    for n in 0..s.izi_a.values.len() {
        let mut row = vec![s.izi_a.values[n].frequency];
        row.extend(raw.iter().map(|sp| sp.values[n].db));
        row.extend(s.smoothed.iter().map(|sp| sp.values[n].db));
        csv.row(&row);
    }
    csv.finish()
}

fn filters_json(s: &ComboSpectra) -> serde_json::Value {
    let per_freq: Vec<_> = s
        .filters
        .iter()
        .map(|c| {
            let e = &c.entries;
            let rows: Vec<Vec<[f64; 2]>> =
                (0..e.rows()).map(|r| e.row(r).iter().map(|z| [z.re, z.im]).collect()).collect();
            json!({ "frequency_hz": c.frequency, "speakers": e.rows(), "channels": e.cols(), "entries": rows })
        })
        .collect();
    json!({
        "mode": s.combo.mode.name(),
        "case": s.combo.case,
        "design": s.combo.design.name(),
        "filters": per_freq,
    })
}

fn manifest(cfg: &ResolvedConfig, command: &str, outputs: Vec<serde_json::Value>, extra: serde_json::Value) -> String {
    json_pretty(&json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "settings": cfg.summary(),
        "outputs": outputs,
        "notes": extra,
    }))
}

/// Sweeps, writes one CSV per combo plus `manifest_spectra.json`.
pub fn run_spectra(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>, RunError> {
    let results = compute_spectra(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut files = Vec::new();
    let mut outputs = Vec::new();
    let mut skipped = serde_json::Map::new();
    for s in &results {
        let name = format!("spectra_{}.csv", s.combo.stem());
        files.push(write_file(dir, &name, &spectra_csv(s)).map_err(io_err(dir))?);
        outputs.push(json!({
            "file": name,
            "kind": "spectra",
            "mode": s.combo.mode.name(),
            "case": s.combo.case,
            "design": s.combo.design.name(),
            "displacement": s.combo.displacement.map(|d| json!({"listener": d.listener.to_string(), "dx": d.dx, "dy": d.dy})),
        }));
        if cfg.source.export_filters {
            let fname = format!("filters_{}.json", s.combo.stem());
            files.push(write_file(dir, &fname, &json_pretty(&filters_json(s))).map_err(io_err(dir))?);
            outputs.push(json!({ "file": fname, "kind": "filters", "mode": s.combo.mode.name(), "case": s.combo.case, "design": s.combo.design.name() }));
        }
        if !s.skipped.is_empty() {
            skipped.insert(s.combo.stem(), json!(s.skipped));
        }
    }
    let text = manifest(cfg, "spectra", outputs, json!({ "skipped_frequencies_hz": skipped }));
    files.push(write_file(dir, "manifest_spectra.json", &text).map_err(io_err(dir))?);
    Ok(files)
}

/// One computed map with its contours and enclosed areas (one per level).
#[derive(Debug, Clone)]
pub struct MapResult {
    pub frequency: f64,
    pub map: IpiMap64,
    pub contours: Vec<ContourSet64>,
    pub areas: Vec<f64>,
}

/// Filters designed for the centred scene at `f`, from the design set.
pub fn centered_filters_at(cfg: &ResolvedConfig, mode: RenderingMode, f: f64) -> Result<FilterMatrix64, PszError> {
    let nominal = scene_transfer_matrix(&cfg.scene, f)?;
    let design = averaged_perturbed(&nominal, &cfg.uncertainty, DESIGN_STREAM);
    design_filters(&cfg.scene, &design, mode, cfg.beta.at(f))
}

pub fn compute_maps(cfg: &ResolvedConfig) -> Result<Vec<MapResult>, RunError> {
    let Some(req) = &cfg.map else {
        return Ok(Vec::new());
    };
    let target = req.mode.program_channels(&cfg.scene, req.listener);
    let interferer = req.mode.program_channels(&cfg.scene, req.listener.other());
    let mut out = Vec::new();
    for &f in &req.frequencies {
        let c = centered_filters_at(cfg, req.mode, f)?;
        let map = ipi_map(&cfg.scene, &c, &req.region, req.resolution, f, &target, &interferer, req.cap_db)?;
        let contours: Vec<ContourSet64> = req.levels_db.iter().map(|&l| extract_contours(&map, l)).collect();
        let areas = contours.iter().map(|c| enclosed_area(c, &map)).collect();
        out.push(MapResult { frequency: f, map, contours, areas });
    }
    Ok(out)
}

fn map_csv(map: &IpiMap64) -> String {
    let mut csv = Csv::new(&["x", "y", "ipi_db"]);
    for j in 0..map.ny {
        for i in 0..map.nx {
            let (x, y) = map.point(i, j);
            csv.row(&[x, y, map.truncated(i, j).unwrap_or(f64::NAN)]);
        }
    }
    csv.finish()
}

fn map_json(map: &IpiMap64, mode: RenderingMode, listener: Zone) -> serde_json::Value {
    let rows: Vec<Vec<Option<f64>>> = (0..map.ny).map(|j| (0..map.nx).map(|i| map.truncated(i, j)).collect()).collect();
    json!({
        "frequency_hz": map.frequency,
        "mode": mode.name(),
        "target_listener": listener.to_string(),
        "x0": map.x0,
        "y0": map.y0,
        "dx": map.dx,
        "dy": map.dy,
        "nx": map.nx,
        "ny": map.ny,
        "cap_db": map.cap_db,
        "values_db": rows,
    })
}

fn contour_json(frequency: f64, c: &ContourSet64) -> serde_json::Value {
    let lines: Vec<_> = c.polylines.iter().map(|p| json!({ "closed": p.closed, "points": p.points })).collect();
    json!({ "frequency_hz": frequency, "level_db": c.level_db, "polylines": lines })
}

/// Scans every requested map frequency; writes maps, contours, `areas.csv`
/// and `manifest_map.json`.
pub fn run_map(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>, RunError> {
    let Some(req) = &cfg.map else {
        return Err(PszError::InvalidArgument("config has no `maps` section".into()).into());
    };
    let results = compute_maps(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut files = Vec::new();
    let mut outputs = Vec::new();
    let mut areas = Csv::new(&["frequency_hz", "level_db", "area_m2"]);
    let mut invalid = serde_json::Map::new();
    for r in &results {
        let label = freq_label(r.frequency);
        let csv_name = format!("map_{label}Hz.csv");
        files.push(write_file(dir, &csv_name, &map_csv(&r.map)).map_err(io_err(dir))?);
        let json_name = format!("map_{label}Hz.json");
        files.push(
            write_file(dir, &json_name, &json_pretty(&map_json(&r.map, req.mode, req.listener)))
                .map_err(io_err(dir))?,
        );
        outputs.push(json!({ "file": csv_name, "kind": "map_csv", "frequency_hz": r.frequency }));
        outputs.push(json!({ "file": json_name, "kind": "map_json", "frequency_hz": r.frequency }));
        for (c, &area) in r.contours.iter().zip(&r.areas) {
            let name = format!("contours_{label}Hz_{}dB.json", freq_label(c.level_db));
            files.push(write_file(dir, &name, &json_pretty(&contour_json(r.frequency, c))).map_err(io_err(dir))?);
            outputs
                .push(json!({ "file": name, "kind": "contours", "frequency_hz": r.frequency, "level_db": c.level_db }));
            areas.row(&[r.frequency, c.level_db, area]);
        }
        if r.map.invalid_count() > 0 {
            invalid.insert(label, json!(r.map.invalid_count()));
        }
    }
    files.push(write_file(dir, "areas.csv", &areas.finish()).map_err(io_err(dir))?);
    outputs.push(json!({ "file": "areas.csv", "kind": "areas" }));
    let text = manifest(cfg, "map", outputs, json!({ "invalid_nodes": invalid }));
    files.push(write_file(dir, "manifest_map.json", &text).map_err(io_err(dir))?);
    Ok(files)
}
