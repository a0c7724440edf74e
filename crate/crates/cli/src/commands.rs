use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use synthrf_core::cdma::{self, CdmaGenConfig};
use synthrf_core::channel::{doppler_spectrum, ChannelSet};
use synthrf_core::dsp::SignalBuffer;
use synthrf_core::prn::{generate_ca_code, SpreadingCode, CA_CHIPPING_RATE_HZ};
use synthrf_core::prs::{self, PrsGenConfig};
use synthrf_core::receiver::{acquire, track, AcquisitionResult};

use crate::chanfile::{load_channel, save_channel};
use crate::config::{load_cdma_config, load_channel_spec, load_prs_config, load_receiver_config, ReceiverConfig};
use crate::iq::{read_iq, write_iq, SampleFormat, Sidecar, SourceTruthRecord, WaveformKind, SIDECAR_VERSION};
use crate::{Cli, CliError, Command, ReceiverArgs};

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("{command} needs --{flag}")))
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let log = &mut std::io::stdout();
    match &cli.command {
        Command::GenChannel => gen_channel(
            required(&cli.config, "config", "gen-channel")?,
            required(&cli.out, "out", "gen-channel")?,
            cli.seed,
            log,
        ),
        Command::Synthesize { kind, channel } => synthesize(
            *kind,
            required(&cli.config, "config", "synthesize")?,
            channel,
            required(&cli.out, "out", "synthesize")?,
            cli.format,
            cli.seed,
            log,
        ),
        Command::Spectrum { channel, source, nfft } => {
            spectrum(channel, source, *nfft, required(&cli.out, "out", "spectrum")?, log)
        }
        Command::Acquire { rx, surface } => acquire_cmd(
            rx,
            cli.config.as_deref(),
            required(&cli.out, "out", "acquire")?,
            *surface,
            log,
        ),
        Command::Track { rx } => track_cmd(rx, cli.config.as_deref(), required(&cli.out, "out", "track")?, log),
    }
}

/// Summaries go to `log`.
pub fn gen_channel(config: &Path, out: &Path, seed: Option<u64>, log: &mut dyn Write) -> Result<(), CliError> {
    let spec = load_channel_spec(config, seed)?;
    let set = synthrf_core::channel::generate_synthetic_channel(&spec)
        .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    save_channel(out, &set).with_context(|| format!("writing {}", out.display()))?;
    for s in set.sources() {
        writeln!(
            log,
            "{} {} {} paths={} power={:.2} dB delay0={:.3e} s",
            s.source_id(),
            s.kind(),
            if s.los() { "los" } else { "nlos" },
            s.paths().len(),
            10.0 * s.total_power().max(1e-30).log10(),
            s.initial_delay_s()
        )?;
    }
    Ok(())
}

fn truth_records(
    channels: &ChannelSet,
    ids: &[(String, Option<u8>)],
    fs: f64,
) -> anyhow::Result<Vec<SourceTruthRecord>> {
    let names: Vec<&str> = ids.iter().map(|(id, _)| id.as_str()).collect();
    let d_min = channels
        .subset(&names)?
        .min_initial_delay_s()
        .ok_or_else(|| anyhow!("no sources configured"))?;
    ids.iter()
        .map(|(id, prn)| {
            let ch = channels
                .source(id)
                .ok_or_else(|| anyhow!("no channel for source {id}"))?;
            let delay_s = ch.initial_delay_s() - d_min;
            Ok(SourceTruthRecord {
                source_id: id.clone(),
                prn: *prn,
                los: ch.los(),
                delay_s,
                delay_samples: delay_s * fs,
                doppler_hz: ch.path0_doppler_hz(channels.update_rate_hz()),
                power: ch.total_power(),
            })
        })
        .collect()
}

pub fn synthesize(
    kind: WaveformKind,
    config: &Path,
    channel: &Path,
    out: &Path,
    format: SampleFormat,
    seed: Option<u64>,
    log: &mut dyn Write,
) -> Result<(), CliError> {
    let channels = load_channel(channel).map_err(|e| CliError::Config(format!("{}: {e}", channel.display())))?;
    let (buf, sidecar) = match kind {
        WaveformKind::Cdma => {
            let cfg = load_cdma_config(config, seed)?;
            let buf = cdma::synthesize(&cfg, &channels).context("CDMA synthesis")?;
            let ids: Vec<_> = cfg.sources.iter().map(|s| (s.source_id.clone(), Some(s.prn))).collect();
            let truth = truth_records(&channels, &ids, cfg.f_s_hz)?;
            (buf, sidecar_for(kind, &channels, Some(cfg), None, truth))
        }
        WaveformKind::Prs => {
            let cfg = load_prs_config(config, seed)?;
            let buf = prs::synthesize_gnb(&cfg, &channels).context("PRS synthesis")?;
            let ids: Vec<_> = cfg.gnbs.iter().map(|g| (g.source_id.clone(), None)).collect();
            let truth = truth_records(&channels, &ids, cfg.carrier.sample_rate_hz())?;
            (buf, sidecar_for(kind, &channels, None, Some(cfg), truth))
        }
    };
    let mut sidecar = sidecar;
    sidecar.duration_s = buf.len() as f64 / buf.sample_rate_hz();
    let written = write_iq(out, &buf, format, sidecar)?;
    writeln!(
        log,
        "{} samples at {} Hz ({} s) -> {}",
        written.samples,
        written.sample_rate_hz,
        written.duration_s,
        out.display()
    )?;
    Ok(())
}

fn sidecar_for(
    kind: WaveformKind,
    channels: &ChannelSet,
    cdma: Option<CdmaGenConfig>,
    prs: Option<PrsGenConfig>,
    truth: Vec<SourceTruthRecord>,
) -> Sidecar {
    Sidecar {
        version: SIDECAR_VERSION,
        kind,
        sample_format: SampleFormat::F32,
        i16_full_scale: None,
        sample_rate_hz: 0.0,
        if_hz: 0.0,
        samples: 0,
        duration_s: 0.0,
        channel_update_rate_hz: channels.update_rate_hz(),
        cdma,
        prs,
        truth,
    }
}

pub fn spectrum(channel: &Path, source: &str, nfft: usize, out: &Path, log: &mut dyn Write) -> Result<(), CliError> {
    let channels = load_channel(channel).map_err(|e| CliError::Config(format!("{}: {e}", channel.display())))?;
    let src = channels
        .source(source)
        .ok_or_else(|| CliError::Config(format!("no source '{source}' in {}", channel.display())))?;
    let spec = doppler_spectrum(src, channels.update_rate_hz(), nfft).map_err(|e| CliError::Config(e.to_string()))?;
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    w.write_record(["freq_hz", "power_db"]).map_err(anyhow::Error::from)?;
    for (f, p) in spec.freq_hz.iter().zip(&spec.power_db) {
        w.write_record([f.to_string(), p.to_string()])
            .map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    let (pf, pdb) = spec.peak();
    writeln!(log, "{source}: peak {pf} Hz at {pdb:.2} dB")?;
    Ok(())
}

struct ReceiverInput {
    buf: SignalBuffer,
    sidecar: Sidecar,
    cfg: ReceiverConfig,
    prns: Vec<u8>,
}

fn receiver_input(rx: &ReceiverArgs, config: Option<&Path>) -> Result<ReceiverInput, CliError> {
    let mut cfg = load_receiver_config(config)?;
    if let Some(t) = rx.threshold {
        cfg.acquisition.snr_threshold_db = t;
    }
    let (buf, sidecar) = read_iq(&rx.iq)?;
    if sidecar.kind != WaveformKind::Cdma {
        return Err(CliError::Config(format!(
            "{} holds a PRS waveform; the receiver handles CDMA only",
            rx.iq.display()
        )));
    }
    let prns = if rx.prn.is_empty() {
        sidecar.truth.iter().filter_map(|t| t.prn).collect()
    } else {
        rx.prn.clone()
    };
    if prns.is_empty() {
        return Err(CliError::Config("no PRNs given and none in the sidecar".into()));
    }
    Ok(ReceiverInput {
        buf,
        sidecar,
        cfg,
        prns,
    })
}

fn code_for(sidecar: &Sidecar, prn: u8) -> Result<SpreadingCode, CliError> {
    let code = match &sidecar.cdma {
        Some(cfg) => cfg.code(prn),
        None => generate_ca_code(prn).and_then(|c| c.with_chipping_rate(CA_CHIPPING_RATE_HZ)),
    };
    code.map_err(|e| CliError::Config(e.to_string()))
}

/// `x` wrapped into (−period/2, period/2].
fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r > period / 2.0 {
        r - period
    } else {
        r
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_surface(path: &Path, result: &AcquisitionResult, freqs: &[f64]) -> anyhow::Result<()> {
    let Some(surface) = &result.correlation_surface else {
        return Ok(());
    };
    let mut w = csv::Writer::from_path(path)?;
    for (f, row) in freqs.iter().zip(surface) {
        let mut rec = vec![f.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn acquire_cmd(
    rx: &ReceiverArgs,
    config: Option<&Path>,
    out: &Path,
    surface: bool,
    log: &mut dyn Write,
) -> Result<(), CliError> {
    let mut input = receiver_input(rx, config)?;
    input.cfg.acquisition.keep_surface = surface;
    let fs = input.buf.sample_rate_hz();
    let has_truth = !input.sidecar.truth.is_empty();
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    let mut header = vec![
        "prn",
        "acquired",
        "code_phase_samples",
        "coarse_freq_hz",
        "fine_freq_hz",
        "snr_db",
        "noise_lags",
    ];
    if has_truth {
        header.extend(["code_phase_error_samples", "doppler_error_hz"]);
    }
    w.write_record(&header).map_err(anyhow::Error::from)?;
    for &prn in &input.prns {
        let code = code_for(&input.sidecar, prn)?;
        let r = acquire(&input.buf, &code, &input.cfg.acquisition).with_context(|| format!("acquiring PRN {prn}"))?;
        let mut rec = vec![
            prn.to_string(),
            r.acquired.to_string(),
            r.code_phase_samples.to_string(),
            r.coarse_freq_hz.to_string(),
            opt(r.fine_freq_hz),
            r.snr_db.to_string(),
            r.noise_lags.to_string(),
        ];
        if has_truth {
            let period = fs * code.period_s();
            match input.sidecar.truth_for_prn(prn) {
                Some(t) => {
                    rec.push(wrap(r.code_phase_samples as f64 - t.delay_samples, period).to_string());
                    rec.push((r.doppler_hz() - t.doppler_hz).to_string());
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec).map_err(anyhow::Error::from)?;
        writeln!(
            log,
            "PRN {prn:02}: {} code phase {} Doppler {:.1} Hz SNR {:.2} dB",
            if r.acquired { "acquired" } else { "rejected" },
            r.code_phase_samples,
            r.doppler_hz(),
            r.snr_db
        )?;
        if surface {
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("acquire");
            let path = out.with_file_name(format!("{stem}.prn{prn:02}.surface.csv"));
            write_surface(&path, &r, &input.cfg.acquisition.frequency_bins())?;
        }
    }
    w.flush().map_err(anyhow::Error::from)?;
    Ok(())
}

pub fn track_cmd(rx: &ReceiverArgs, config: Option<&Path>, out: &Path, log: &mut dyn Write) -> Result<(), CliError> {
    let input = receiver_input(rx, config)?;
    let fs = input.buf.sample_rate_hz();
    let has_truth = !input.sidecar.truth.is_empty();
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    let mut header = vec![
        "prn",
        "epoch_s",
        "code_delay_samples",
        "doppler_hz",
        "prompt_i",
        "prompt_q",
        "dll_discriminator",
        "pll_discriminator",
        "lost_lock",
    ];
    if has_truth {
        header.extend(["code_delay_error_samples", "doppler_error_hz"]);
    }
    w.write_record(&header).map_err(anyhow::Error::from)?;
    for &prn in &input.prns {
        let code = code_for(&input.sidecar, prn)?;
        let acq = acquire(&input.buf, &code, &input.cfg.acquisition).with_context(|| format!("acquiring PRN {prn}"))?;
        if !acq.acquired {
            writeln!(
                log,
                "PRN {prn:02}: not acquired (SNR {:.2} dB), not tracked",
                acq.snr_db
            )?;
            continue;
        }
        let trace =
            track(&input.buf, &code, &acq, &input.cfg.tracking).with_context(|| format!("tracking PRN {prn}"))?;
        let truth = input.sidecar.truth_for_prn(prn);
        let period = fs * code.period_s();
        for r in &trace.records {
            let mut rec = vec![
                prn.to_string(),
                r.epoch_s.to_string(),
                r.code_delay_samples.to_string(),
                r.doppler_hz.to_string(),
                r.prompt_i.to_string(),
                r.prompt_q.to_string(),
                r.dll_discriminator.to_string(),
                r.pll_discriminator.to_string(),
                trace.lost_lock.to_string(),
            ];
            if has_truth {
                match truth {
                    Some(t) => {
                        rec.push(wrap(r.code_delay_samples - t.delay_samples, period).to_string());
                        rec.push((r.doppler_hz - t.doppler_hz).to_string());
                    }
                    None => rec.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&rec).map_err(anyhow::Error::from)?;
        }
        let tail: Vec<f64> = trace.records.iter().rev().take(100).map(|r| r.doppler_hz).collect();
        let mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
        writeln!(
            log,
            "PRN {prn:02}: {} epochs, final Doppler {:.2} Hz{}",
            trace.records.len(),
            mean,
            if trace.lost_lock { ", lost lock" } else { "" }
        )?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::wrap;

    #[test]
    fn wrap_is_centred() {
        assert_eq!(wrap(10.0, 100.0), 10.0);
        assert_eq!(wrap(90.0, 100.0), -10.0);
        assert_eq!(wrap(-10.0, 100.0), -10.0);
        assert_eq!(wrap(50.0, 100.0), 50.0);
    }
}
