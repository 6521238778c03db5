use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use behavio_core::expressions::{
    asymmetry, diversity, diversity_table, expressivity_table, expressivity_with,
    multiscale_decompose_with, ExpressionError, ExpressivityConfig, IntensityMeasure, PeakConfig,
    ScaleSet, DIVERSITY_ESTIMATOR,
};
use behavio_core::fsutil::{write_atomic, DirLock};
use behavio_core::ingest::{read_track, write_track_as, TrackFormat, FORMAT_VERSION};
use behavio_core::kinematics::{
    motion_kinematics, relative_motion, report_table, trajectories_from_landmarks,
    trajectory_from_pose, trajectory_from_rects, RelativeTo, Trajectory, TrajectorySource,
    LDLJ_NORMALIZATION,
};
use behavio_core::model::{
    landmark_labels, ExpressionTrack, LandmarkTrack, MirrorTemplate, Modality, PoseTrack,
    RectTrack, Signal, DEFAULT_ACCURACY,
};
use behavio_core::provenance::{
    citation_block, format_retention, hash_input, parse_retention, read_sidecar, shell_quote,
    should_reuse, sidecar_path, write_sidecar, BackendSpec, CitationConfig, CommandTemplate,
    FixedClock, ReuseReason, RetentionPeriod, RunStatus, Runner, SidecarMetadata,
};
use behavio_core::social::{
    coordination, imitation, summary_table, windows_table, LagAggregate, LagMode, LagObjective,
    Pairing, WindowedCorrelation, XcorrConfig,
};
use chrono::{DateTime, FixedOffset, Local};
use ndarray::{concatenate, Axis};
use serde_json::{json, Value};

use crate::config::{
    DirSettings, FileConfig, IntensityArg, LagAggregateArg, ObjectiveArg, PairingArg,
    PlotFormatArg, TrackFormatArg, SETTINGS_DIR,
};
use crate::plot::{render_html, render_svg, Overlay, PeakMark};
use crate::{
    CacheAction, CitationArgs, Cli, CliError, Command, PlotArgs, RunBackendArgs, XcorrArgs,
    NOW_ENV,
};

const TOOL: &str = "behavio";
const DEFAULT_SCALES: &str = "6";
const DEFAULT_WIDTH_S: f64 = 1.1;
const DEFAULT_STEP_S: f64 = 0.5;

enum Artifact {
    Track(Signal, TrackFormat),
    Text(String),
}

struct Session<'a> {
    cfg: FileConfig,
    out_dir: PathBuf,
    retention: RetentionPeriod,
    force: bool,
    now: DateTime<FixedOffset>,
    cmd: String,
    out: &'a mut dyn Write,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("{}: {e}", path.display()))
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn clock_now() -> Result<DateTime<FixedOffset>, CliError> {
    match std::env::var(NOW_ENV) {
        Ok(text) => DateTime::parse_from_rfc3339(text.trim())
            .map_err(|e| CliError::Invalid(format!("{NOW_ENV}=`{text}`: {e}"))),
        Err(_) => Ok(Local::now().fixed_offset()),
    }
}

/// The invocation as a shell command, without flags that do not change
/// what gets computed.
fn recorded_command(argv: &[OsString]) -> String {
    let mut parts = vec![TOOL.to_string()];
    parts.extend(
        argv.iter()
            .skip(1)
            .map(|a| a.to_string_lossy().into_owned())
            .filter(|a| a != "--force")
            .map(|a| shell_quote(&a)),
    );
    parts.join(" ")
}

/// `pose.bbx.csv` → `pose`.
fn stem(p: &Path) -> String {
    let mut name = p
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    for ext in [".csv", ".bbxj", ".json", ".txt"] {
        if let Some(s) = name.strip_suffix(ext) {
            name = s.to_string();
            break;
        }
    }
    if let Some(s) = name.strip_suffix(".bbx") {
        name = s.to_string();
    }
    if name.is_empty() {
        "track".into()
    } else {
        name
    }
}

fn unique_stems(inputs: &[PathBuf]) -> Result<Vec<String>, CliError> {
    let stems: Vec<String> = inputs.iter().map(|p| stem(p)).collect();
    let mut seen = BTreeSet::new();
    for (s, p) in stems.iter().zip(inputs) {
        if !seen.insert(s) {
            return Err(CliError::Invalid(format!(
                "{}: another input also maps to output name `{s}`",
                p.display()
            )));
        }
    }
    Ok(stems)
}

fn read(path: &Path) -> Result<Signal, CliError> {
    Ok(read_track(path)?)
}

fn parse_scales(text: &str) -> Result<ScaleSet, CliError> {
    text.parse::<ScaleSet>()
        .map_err(|e: ExpressionError| CliError::Invalid(format!("--scales `{text}`: {e}")))
}

fn resolve_retention(
    flag: Option<&str>,
    cfg: &FileConfig,
    out_dir: &Path,
) -> Result<RetentionPeriod, CliError> {
    if let Some(text) = flag.or(cfg.retention.as_deref()) {
        return Ok(parse_retention(text)?);
    }
    match DirSettings::load(out_dir)?.retention {
        Some(text) => parse_retention(&text).map_err(|e| {
            CliError::Cache(format!("{}: {e}", DirSettings::path(out_dir).display()))
        }),
        None => Ok(RetentionPeriod::default()),
    }
}

pub(crate) fn execute(cli: Cli, argv: &[OsString], out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    if let Command::Citation(args) = &cli.command {
        return citation(args, &cfg, out);
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let retention = resolve_retention(cli.retention.as_deref(), &cfg, &out_dir)?;
    let mut session = Session {
        cfg,
        out_dir,
        retention,
        force: cli.force,
        now: clock_now()?,
        cmd: recorded_command(argv),
        out,
    };
    // the runner takes the directory lock itself
    if let Command::RunBackend(args) = &cli.command {
        return session.run_backend(args, args.dry_run);
    }
    let _lock = DirLock::acquire(&session.out_dir).map_err(|e| io_err(&session.out_dir, e))?;
    match cli.command {
        Command::Convert { inputs, to } => session.convert(&inputs.inputs, to),
        Command::Kinematics {
            inputs,
            angular,
            compat,
        } => session.kinematics(&inputs.inputs, angular, compat),
        Command::RelativeMotion {
            inputs,
            reference,
            angular,
        } => session.relative_motion(&inputs.inputs, reference.as_deref(), angular),
        Command::Asymmetry { inputs, template } => session.asymmetry(&inputs.inputs, template),
        Command::Expressivity {
            inputs,
            scales,
            peak_z,
            intensity,
        } => session.expressivity(&inputs.inputs, scales, peak_z, intensity),
        Command::Diversity { inputs, scales } => session.diversity(&inputs.inputs, scales),
        Command::Imitation {
            participant,
            reference,
            no_causality,
            xcorr,
        } => session.xcorr("imitation", &participant, &reference, Some(!no_causality), &xcorr),
        Command::Coordination { a, b, xcorr } => session.xcorr("coordination", &a, &b, None, &xcorr),
        Command::Cache { action } => match action {
            CacheAction::Show => session.cache_show(),
            CacheAction::SetRetention { period } => session.set_retention(&period),
        },
        Command::Plot(args) => session.plot(&args),
        Command::Citation(_) | Command::RunBackend(_) => unreachable!(),
    }
}

impl Session<'_> {
    fn say(&mut self, verb: &str, path: &Path) -> Result<(), CliError> {
        writeln!(self.out, "{verb} {}", path.display()).map_err(|e| io_err(Path::new("stdout"), e))
    }

    /// Writes `outputs` from `compute` unless every one of them is a valid
    /// cache hit for the same command and inputs.
    fn produce(
        &mut self,
        command: &str,
        inputs: &[&Path],
        outputs: &[PathBuf],
        params: Value,
        compute: impl FnOnce() -> Result<Vec<Artifact>, CliError>,
    ) -> Result<(), CliError> {
        let hashes = inputs
            .iter()
            .map(|p| hash_input(p))
            .collect::<Result<Vec<_>, _>>()?;
        let abs_inputs: Vec<PathBuf> = inputs.iter().map(|p| absolute(p)).collect();
        for o in outputs {
            if abs_inputs.contains(&absolute(o)) {
                return Err(CliError::Invalid(format!(
                    "{}: output would overwrite an input",
                    o.display()
                )));
            }
        }
        let recorded_hashes = json!(hashes);
        if !self.force && self.all_reusable(outputs, &hashes[0], &recorded_hashes)? {
            for o in outputs {
                self.say("reused", o)?;
            }
            return Ok(());
        }

        let artifacts = compute()?;
        debug_assert_eq!(artifacts.len(), outputs.len());
        let extra: BTreeMap<String, Value> = [
            ("command".to_string(), json!(command)),
            (
                "inputs".to_string(),
                json!(abs_inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()),
            ),
            ("input_hashes".to_string(), recorded_hashes),
            ("params".to_string(), params),
            ("format_version".to_string(), json!(FORMAT_VERSION)),
        ]
        .into();
        for (o, artifact) in outputs.iter().zip(artifacts) {
            match artifact {
                Artifact::Track(s, format) => write_track_as(&s, o, format)?,
                Artifact::Text(text) => write_atomic(o, text.as_bytes()).map_err(|e| io_err(o, e))?,
            }
            let mut meta = SidecarMetadata::new(
                TOOL,
                &self.cmd,
                &abs_inputs[0].display().to_string(),
                &hashes[0],
                &absolute(&self.out_dir).display().to_string(),
                self.now,
            );
            meta.extra = extra.clone();
            write_sidecar(&meta, o)?;
            self.say("wrote", o)?;
        }
        Ok(())
    }

    fn all_reusable(
        &self,
        outputs: &[PathBuf],
        first_hash: &str,
        hashes: &Value,
    ) -> Result<bool, CliError> {
        let mut reusable = true;
        for o in outputs {
            let decision = should_reuse(o, &self.retention, first_hash, self.now);
            if let ReuseReason::SidecarUnreadable(msg) = &decision.reason {
                return Err(CliError::Cache(format!(
                    "{msg}; delete {} or rerun with --force",
                    sidecar_path(o)?.display()
                )));
            }
            reusable &= decision.reuse
                && read_sidecar(o).is_ok_and(|m| {
                    m.cmd == self.cmd && m.extra.get("input_hashes") == Some(hashes)
                });
        }
        Ok(reusable)
    }

    fn output(&self, name: String) -> PathBuf {
        self.out_dir.join(name)
    }

    fn convert(&mut self, inputs: &[PathBuf], to: Option<TrackFormatArg>) -> Result<(), CliError> {
        let to = to.or(self.cfg.to).unwrap_or(TrackFormatArg::Csv);
        let (format, suffix) = match to {
            TrackFormatArg::Csv => (TrackFormat::Csv, "bbx.csv"),
            TrackFormatArg::Json => (TrackFormat::Json, "bbxj"),
        };
        for (input, stem) in inputs.iter().zip(unique_stems(inputs)?) {
            let o = self.output(format!("{stem}.{suffix}"));
            let params = json!({ "to": format!("{to:?}").to_lowercase() });
            self.produce("convert", &[input], &[o], params, || {
                Ok(vec![Artifact::Track(read(input)?, format)])
            })?;
        }
        Ok(())
    }

    fn kinematics(&mut self, inputs: &[PathBuf], angular: bool, compat: bool) -> Result<(), CliError> {
        let angular = angular || self.cfg.angular.unwrap_or(false);
        let compat = compat || self.cfg.compat.unwrap_or(false);
        for (input, stem) in inputs.iter().zip(unique_stems(inputs)?) {
            let o = self.output(format!("{stem}.kinematics.csv"));
            let params = json!({
                "angular": angular,
                "compat": compat,
                "derivative_accuracy": DEFAULT_ACCURACY,
                "ldlj": LDLJ_NORMALIZATION,
            });
            self.produce("kinematics", &[input], &[o], params, || {
                let (trajectories, _) = trajectories(&read(input)?, angular)?;
                let reports = trajectories
                    .iter()
                    .map(motion_kinematics)
                    .collect::<Result<Vec<_>, _>>()?;
                let table = report_table(trajectories[0].axes(), &reports, compat)?;
                Ok(vec![Artifact::Track(table, TrackFormat::Csv)])
            })?;
        }
        Ok(())
    }

    fn relative_motion(
        &mut self,
        inputs: &[PathBuf],
        reference: Option<&Path>,
        angular: bool,
    ) -> Result<(), CliError> {
        let angular = angular || self.cfg.angular.unwrap_or(false);
        for (input, stem) in inputs.iter().zip(unique_stems(inputs)?) {
            let o = self.output(format!("{stem}.relative-motion.csv"));
            let mut used: Vec<&Path> = vec![input];
            used.extend(reference);
            let params = json!({
                "angular": angular,
                "reference": if reference.is_some() { "track" } else { "first-frame" },
            });
            self.produce("relative-motion", &used, &[o], params, || {
                let signal = read(input)?;
                let (moving, landmarks) = trajectories(&signal, angular)?;
                let refs = match reference {
                    Some(r) => Some(trajectories(&read(r)?, angular)?.0),
                    None => None,
                };
                let relative = moving
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let to = match &refs {
                            None => RelativeTo::FirstFrame,
                            Some(r) if r.len() == 1 => RelativeTo::Trajectory(&r[0]),
                            Some(r) if r.len() == moving.len() => RelativeTo::Trajectory(&r[i]),
                            Some(r) => {
                                return Err(CliError::Invalid(format!(
                                    "reference has {} trajectories, input has {}",
                                    r.len(),
                                    moving.len()
                                )))
                            }
                        };
                        Ok(relative_motion(t, to)?)
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                let views: Vec<_> = relative.iter().map(|t| t.positions()).collect();
                let data = concatenate(Axis(1), &views)
                    .map_err(|e| CliError::Invalid(e.to_string()))?;
                let result = if landmarks {
                    let dims = relative[0].dims();
                    Signal::new(data, signal.fps(), landmark_labels(relative.len(), dims), signal.modality())?
                        .with_meta(signal.meta().clone())
                } else {
                    Signal::new(data, signal.fps(), relative[0].axes().to_vec(), Modality::Generic)?
                };
                Ok(vec![Artifact::Track(result, TrackFormat::Csv)])
            })?;
        }
        Ok(())
    }

    fn asymmetry(&mut self, inputs: &[PathBuf], template: Option<String>) -> Result<(), CliError> {
        let template = template.or_else(|| self.cfg.template.clone());
        for (input, stem) in inputs.iter().zip(unique_stems(inputs)?) {
            let o = self.output(format!("{stem}.asymmetry.csv"));
            let track = LandmarkTrack::new(read(input)?)?;
            let id = template
                .clone()
                .or_else(|| track.template_id().map(String::from))
                .ok_or_else(|| {
                    CliError::Invalid(format!(
                        "{}: track names no landmark template; pass --template",
                        input.display()
                    ))
                })?;
            let mirror = MirrorTemplate::builtin(&id)?;
            let params = json!({
                "template": mirror.template_id,
                "dims": track.dims(),
                "caution_2d": track.dims() == 2,
            });
            self.produce("asymmetry", &[input], &[o], params, || {
                let scores = asymmetry(&track, &mirror)?;
                Ok(vec![Artifact::Track(scores.scores, TrackFormat::Csv)])
            })?;
        }
        Ok(())
    }

    fn scales(&self, flag: Option<String>, default: &str) -> Result<ScaleSet, CliError> {
        let text = flag
            .or_else(|| self.cfg.scales.clone())
            .unwrap_or_else(|| default.into());
        parse_scales(&text)
    }

    fn expressivity(
        &mut self,
        inputs: &[PathBuf],
        scales: Option<String>,
        peak_z: Option<f64>,
        intensity: Option<IntensityArg>,
    ) -> Result<(), CliError> {
        let scales = self.scales(scales, DEFAULT_SCALES)?;
        let z = peak_z.or(self.cfg.peak_z).unwrap_or(PeakConfig::default().z);
        let intensity = match intensity.or(self.cfg.intensity).unwrap_or(IntensityArg::Peak) {
            IntensityArg::Peak => IntensityMeasure::PeakAmplitude,
            IntensityArg::Rms => IntensityMeasure::Rms,
        };
        let config = ExpressivityConfig {
            peaks: PeakConfig { z },
            intensity,
        };
        for (input, stem) in inputs.iter().zip(unique_stems(inputs)?) {
            let o = self.output(format!("{stem}.expressivity.csv"));
            let params = json!({
                "scales": scales.to_string(),
                "window_s": scales.window_seconds(),
                "peak_z": z,
                "intensity": format!("{intensity:?}"),
            });
            self.produce("expressivity", &[input], &[o], params, || {
                let track = ExpressionTrack::new(read(input)?)?;
                let stats = expressivity_with(&track, &scales, config)?;
                Ok(vec![Artifact::Track(expressivity_table(&stats)?, TrackFormat::Csv)])
            })?;
        }
        Ok(())
    }

    fn diversity(&mut self, inputs: &[PathBuf], scales: Option<String>) -> Result<(), CliError> {
        let scales = self.scales(scales, DEFAULT_SCALES)?;
        for (input, stem) in inputs.iter().zip(unique_stems(inputs)?) {
            let o = self.output(format!("{stem}.diversity.csv"));
            let params = json!({
                "scales": scales.to_string(),
                "window_s": scales.window_seconds(),
                "estimator": DIVERSITY_ESTIMATOR,
            });
            self.produce("diversity", &[input], &[o], params, || {
                let track = ExpressionTrack::new(read(input)?)?;
                let d = diversity(&track, &scales)?;
                Ok(vec![Artifact::Track(diversity_table(&d)?, TrackFormat::Csv)])
            })?;
        }
        Ok(())
    }

    fn xcorr_config(&self, args: &XcorrArgs) -> XcorrConfig {
        let cfg = &self.cfg;
        let mut x = XcorrConfig::new(
            args.width.or(cfg.width).unwrap_or(DEFAULT_WIDTH_S),
            args.step.or(cfg.step).unwrap_or(DEFAULT_STEP_S),
            LagMode::Bidirectional,
        );
        x.max_lag_s = args.max_lag.or(cfg.max_lag);
        x.pairing = args.pairing.or(cfg.pairing).map(|p| match p {
            PairingArg::Matched => Pairing::Matched,
            PairingArg::AllPairs => Pairing::AllPairs,
        });
        if let Some(o) = args.objective.or(cfg.objective) {
            x.objective = match o {
                ObjectiveArg::MaxSigned => LagObjective::MaxSigned,
                ObjectiveArg::MaxAbs => LagObjective::MaxAbs,
            };
        }
        if let Some(a) = args.lag_aggregate.or(cfg.lag_aggregate) {
            x.lag_aggregate = match a {
                LagAggregateArg::Mean => LagAggregate::Mean,
                LagAggregateArg::Median => LagAggregate::Median,
            };
        }
        x
    }

    /// Imitation when `causality` is set, coordination otherwise.
    fn xcorr(
        &mut self,
        command: &str,
        a: &Path,
        b: &Path,
        causality: Option<bool>,
        args: &XcorrArgs,
    ) -> Result<(), CliError> {
        let causality = causality.map(|c| c && self.cfg.causality.unwrap_or(true));
        let cfg = self.xcorr_config(args);
        let fps = args.fps.or(self.cfg.fps);
        let name = format!("{}_{}", stem(a), stem(b));
        let outputs = [
            self.output(format!("{name}.{command}.csv")),
            self.output(format!("{name}.{command}-summary.csv")),
        ];
        let params = json!({
            "width_s": cfg.width_s,
            "step_s": cfg.step_s,
            "max_lag_s": cfg.max_lag_s(),
            "causality": causality,
            "pairing": cfg.pairing.map(|p| format!("{p:?}")),
            "objective": format!("{:?}", cfg.objective),
            "lag_aggregate": format!("{:?}", cfg.lag_aggregate),
            "fps": fps,
        });
        self.produce(command, &[a, b], &outputs, params, || {
            let (sa, sb) = (read(a)?, read(b)?);
            if let Some(fps) = fps {
                for (path, s) in [(a, &sa), (b, &sb)] {
                    if (s.fps() - fps).abs() > 1e-9 * fps.abs() {
                        return Err(CliError::Invalid(format!(
                            "{}: track is sampled at {} fps but --fps is {fps}",
                            path.display(),
                            s.fps()
                        )));
                    }
                }
            }
            let result: WindowedCorrelation = match causality {
                Some(c) => imitation(&sa, &sb, &cfg, c)?,
                None => coordination(&sa, &sb, &cfg)?,
            };
            Ok(vec![
                Artifact::Track(windows_table(&result)?, TrackFormat::Csv),
                Artifact::Track(summary_table(&result)?, TrackFormat::Csv),
            ])
        })
    }

    fn run_backend(&mut self, args: &RunBackendArgs, dry_run: bool) -> Result<(), CliError> {
        let bcfg = self.cfg.backend.clone();
        let template_text = args
            .template
            .clone()
            .or(bcfg.template)
            .ok_or_else(|| CliError::Invalid("run-backend needs --template or [backend].template".into()))?;
        let template = CommandTemplate::parse(&template_text)?;
        let name = args.name.clone().or(bcfg.name).unwrap_or_else(|| "backend".into());
        let output_names = if args.outputs.is_empty() { bcfg.outputs } else { args.outputs.clone() };
        let mut bindings = bcfg.bind;
        for pair in &args.bind {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Invalid(format!("--bind `{pair}`: expected KEY=VALUE")))?;
            bindings.insert(k.trim().to_string(), v.to_string());
        }
        let input = absolute(&args.input);
        let output_dir = absolute(&self.out_dir);
        let outputs: Vec<PathBuf> = output_names.iter().map(|n| output_dir.join(n)).collect();
        let extra: BTreeMap<String, Value> = bindings
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "input" | "output" | "output_dir" | "runtime"))
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect();
        bindings.insert("input".into(), input.display().to_string());
        bindings.insert("output_dir".into(), output_dir.display().to_string());
        if let [single] = outputs.as_slice() {
            bindings.insert("output".into(), single.display().to_string());
        }
        let spec = BackendSpec {
            backend: name,
            template,
            bindings,
            input,
            output_dir,
            outputs,
            extra,
        };
        let runner = Runner::with_clock(self.retention.clone(), Box::new(FixedClock(self.now)));
        if dry_run {
            let cmd = runner.materialize(&spec)?;
            return writeln!(self.out, "{cmd}").map_err(|e| io_err(Path::new("stdout"), e));
        }
        if !spec.input.is_file() {
            return Err(io_err(&args.input, "input file not found"));
        }
        for o in &spec.outputs {
            let sidecar = sidecar_path(o)?;
            if self.force {
                if sidecar.exists() {
                    std::fs::remove_file(&sidecar).map_err(|e| io_err(&sidecar, e))?;
                }
            } else if sidecar.exists() {
                if let Err(e) = read_sidecar(o) {
                    return Err(CliError::Cache(format!(
                        "{e}; delete {} or rerun with --force",
                        sidecar.display()
                    )));
                }
            }
        }
        let record = runner.run(&spec, false)?;
        let verb = if record.status == RunStatus::Reused { "reused" } else { "wrote" };
        for o in &spec.outputs {
            self.say(verb, o)?;
        }
        Ok(())
    }

    fn cache_show(&mut self) -> Result<(), CliError> {
        writeln!(self.out, "retention: {}", format_retention(self.retention.seconds()))
            .map_err(|e| io_err(Path::new("stdout"), e))?;
        let mut files = Vec::new();
        collect_outputs(&self.out_dir, &mut files)?;
        files.sort();
        let mut corrupt = Vec::new();
        for f in files {
            let sidecar = sidecar_path(&f)?;
            let line = if !sidecar.exists() {
                format!("{}\tno sidecar", f.display())
            } else {
                match read_sidecar(&f) {
                    Ok(meta) => {
                        let created = meta.created_at(*self.now.offset());
                        let age = (self.now - created).num_seconds().max(0) as u64;
                        let status = if age <= self.retention.seconds() { "fresh" } else { "expired" };
                        format!(
                            "{}\t{}\t{}\tage {age}s\t{status}",
                            f.display(),
                            meta.backend,
                            created.format("%Y-%m-%d %H:%M:%S %:z"),
                        )
                    }
                    Err(e) => {
                        corrupt.push(e.to_string());
                        format!("{}\tcorrupt sidecar", f.display())
                    }
                }
            };
            writeln!(self.out, "{line}").map_err(|e| io_err(Path::new("stdout"), e))?;
        }
        match corrupt.first() {
            None => Ok(()),
            Some(first) => Err(CliError::Cache(format!(
                "{} corrupt sidecar(s), first: {first}",
                corrupt.len()
            ))),
        }
    }

    fn set_retention(&mut self, period: &str) -> Result<(), CliError> {
        let parsed = parse_retention(period)?;
        let canonical = format_retention(parsed.seconds());
        let path = DirSettings::path(&self.out_dir);
        std::fs::create_dir_all(path.parent().unwrap_or(&self.out_dir)).map_err(|e| io_err(&path, e))?;
        let settings = DirSettings {
            retention: Some(canonical.clone()),
        };
        let text = toml::to_string(&settings).map_err(|e| io_err(&path, e))?;
        write_atomic(&path, text.as_bytes()).map_err(|e| io_err(&path, e))?;
        writeln!(self.out, "retention {canonical} stored in {}", path.display())
            .map_err(|e| io_err(Path::new("stdout"), e))
    }

    fn plot(&mut self, args: &PlotArgs) -> Result<(), CliError> {
        let scales = self.scales(args.scales.clone(), "none")?;
        let z = args.peak_z.or(self.cfg.peak_z).unwrap_or(PeakConfig::default().z);
        let format = args.format.or(self.cfg.format).unwrap_or(PlotFormatArg::Html);
        let ext = match format {
            PlotFormatArg::Html => "html",
            PlotFormatArg::Svg => "svg",
        };
        let inputs = &args.inputs.inputs;
        for (input, stem) in inputs.iter().zip(unique_stems(inputs)?) {
            let o = self.output(format!("{stem}.plot.{ext}"));
            let mut used: Vec<&Path> = vec![input];
            used.extend(args.overlays.iter().map(PathBuf::as_path));
            let params = json!({ "scales": scales.to_string(), "peak_z": z, "format": ext });
            let overlays = &args.overlays;
            let scales = &scales;
            self.produce("plot", &used, &[o], params, || {
                let signal = read(input)?;
                if signal.frames() == 0 {
                    return Err(io_err(input, "cannot plot an empty track"));
                }
                let mut layers = Vec::new();
                if matches!(signal.modality(), Modality::Expressions | Modality::Generic) {
                    match multiscale_decompose_with(&signal, scales, PeakConfig { z }) {
                        Ok(d) => {
                            let marks = d
                                .peaks
                                .iter()
                                .zip(&d.scales)
                                .flat_map(|(per_channel, scale)| {
                                    per_channel.iter().enumerate().flat_map(move |(c, peaks)| {
                                        peaks.iter().map(move |p| PeakMark {
                                            channel: c,
                                            frame: p.frame,
                                            scale_s: scale.seconds,
                                        })
                                    })
                                })
                                .collect();
                            layers.push(Overlay::Peaks(marks));
                        }
                        Err(ExpressionError::NonFinite { .. }) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
                for path in overlays {
                    let s = read(path)?;
                    layers.push(match s.modality() {
                        Modality::Landmarks2d | Modality::Landmarks3d => {
                            Overlay::Landmarks(LandmarkTrack::new(s)?)
                        }
                        Modality::Rects => Overlay::Rects(RectTrack::new(s)?),
                        other => {
                            return Err(io_err(
                                path,
                                format!("overlays must be landmark or rect tracks, got {other}"),
                            ))
                        }
                    });
                }
                let text = match format {
                    PlotFormatArg::Html => render_html(&signal, &layers),
                    PlotFormatArg::Svg => render_svg(&signal, &layers),
                };
                Ok(vec![Artifact::Text(text)])
            })?;
        }
        Ok(())
    }
}

/// Trajectories in a track, and whether they are landmark points.
fn trajectories(s: &Signal, angular: bool) -> Result<(Vec<Trajectory>, bool), CliError> {
    let found = match s.modality() {
        Modality::Rects => (vec![trajectory_from_rects(&RectTrack::new(s.clone())?)?], false),
        Modality::Pose => (vec![trajectory_from_pose(&PoseTrack::new(s.clone())?, angular)?], false),
        Modality::Landmarks2d | Modality::Landmarks3d => (
            trajectories_from_landmarks(&LandmarkTrack::new(s.clone())?)?,
            true,
        ),
        Modality::Generic if matches!(s.channels(), 2 | 3) => {
            let t = Trajectory::new(s.data().to_owned(), s.fps(), TrajectorySource::Generic)?
                .with_axes(s.labels());
            (vec![t], false)
        }
        other => {
            return Err(CliError::Invalid(format!(
                "motion needs a rects, pose, landmarks or 2/3-channel generic track, got {other} with {} channels",
                s.channels()
            )))
        }
    };
    if found.0.is_empty() {
        return Err(CliError::Invalid("track has no trajectories".into()));
    }
    Ok(found)
}

fn collect_outputs(dir: &Path, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(io_err(dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == SETTINGS_DIR || name == DirLock::FILE_NAME || name.starts_with(".tmp") {
            continue;
        }
        if path.is_dir() {
            collect_outputs(&path, files)?;
        } else if !name.ends_with(".json") {
            files.push(path);
        }
    }
    Ok(())
}

fn citation(args: &CitationArgs, cfg: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let c = &cfg.citation;
    let version = args
        .toolkit_version
        .clone()
        .or_else(|| c.toolkit_version.clone())
        .unwrap_or_else(|| env!("CARGO_PKG_VERSION").to_string());
    let backend = args
        .backend
        .clone()
        .or_else(|| c.backend.clone())
        .or_else(|| cfg.backend.name.clone())
        .unwrap_or_default();
    let block = citation_block(&CitationConfig {
        morphable_model: args.model.clone().or_else(|| c.model.clone()),
        camera_fov_deg: args.fov.or(c.fov),
        landmark_template: args.landmark_template.clone().or_else(|| c.landmark_template.clone()),
        used_local_coefficients: args.local || c.local.unwrap_or(false),
        ..CitationConfig::new(&version, &backend)
    });
    write!(out, "{}", block).map_err(|e| io_err(Path::new("stdout"), e))?;
    if !block.ends_with('\n') {
        writeln!(out).map_err(|e| io_err(Path::new("stdout"), e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_drop_track_suffixes() {
        assert_eq!(stem(Path::new("a/pose.bbx.csv")), "pose");
        assert_eq!(stem(Path::new("face.bbxj")), "face");
        assert_eq!(stem(Path::new("x.csv")), "x");
        assert_eq!(stem(Path::new("noext")), "noext");
        assert_eq!(stem(Path::new(".csv")), "track");
    }

    #[test]
    fn duplicate_stems_rejected() {
        let err = unique_stems(&["a/x.csv".into(), "b/x.bbx.csv".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn force_is_not_recorded() {
        let argv: Vec<OsString> = ["behavio", "--force", "kinematics", "--input", "a b.csv"]
            .map(OsString::from)
            .to_vec();
        assert_eq!(recorded_command(&argv), "behavio kinematics --input 'a b.csv'");
    }
}
