//! Channel files.
//!
//! Text form: a `SYNTHRF-CHAN v1` header line, then for each source a line
//!
//! ```text
//! source <id> <kind> <los> <n_paths> <f_ch_hz> <n_snapshots>
//! ```
//!
//! followed by `n_paths × n_snapshots` rows `t_index,H_real,H_imag,delay_s`,
//! path by path.
//!
//! Binary form (`.bin`): the header bytes `SYNTHRF-CHAN v1\n`, then per source
//! `u32` id length, id bytes, `u8` kind (0 satellite, 1 haps, 2 gnb), `u8` los,
//! `u32` n_paths, `f64` f_ch_hz, `u64` n_snapshots, then the same rows as four
//! `f64` each. Everything little-endian.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use synthrf_core::channel::{ChannelSet, PathSeries, SourceChannel, SourceKind};

pub const CHANNEL_MAGIC: &str = "SYNTHRF-CHAN v1";

#[derive(Debug, thiserror::Error)]
pub enum ChannelFileError {
    #[error("not a channel file: expected header '{CHANNEL_MAGIC}'")]
    Header,
    #[error("channel file truncated: {0}")]
    Truncated(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("channel file has no sources")]
    Empty,
    #[error(transparent)]
    Invalid(#[from] synthrf_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelFormat {
    Text,
    Binary,
}

impl ChannelFormat {
    /// `.bin` selects the binary form, anything else text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("bin") => Self::Binary,
            _ => Self::Text,
        }
    }
}

pub fn save_channel(path: &Path, set: &ChannelSet) -> Result<(), ChannelFileError> {
    let mut w = BufWriter::new(File::create(path)?);
    match ChannelFormat::from_path(path) {
        ChannelFormat::Text => write_channel_text(set, &mut w)?,
        ChannelFormat::Binary => write_channel_binary(set, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn load_channel(path: &Path) -> Result<ChannelSet, ChannelFileError> {
    let file = BufReader::new(File::open(path)?);
    match ChannelFormat::from_path(path) {
        ChannelFormat::Text => read_channel_text(file),
        ChannelFormat::Binary => read_channel_binary(file),
    }
}

pub fn write_channel_text<W: Write>(set: &ChannelSet, w: &mut W) -> io::Result<()> {
    writeln!(w, "{CHANNEL_MAGIC}")?;
    let f_ch = set.update_rate_hz();
    for s in set.sources() {
        writeln!(
            w,
            "source {} {} {} {} {} {}",
            s.source_id(),
            s.kind(),
            s.los(),
            s.paths().len(),
            f_ch,
            s.snapshots()
        )?;
        for p in s.paths() {
            for (t, (h, d)) in p.coefficients().iter().zip(p.delays_s()).enumerate() {
                writeln!(w, "{t},{},{},{}", h.re, h.im, d)?;
            }
        }
    }
    Ok(())
}

struct SourceHeader {
    id: String,
    kind: SourceKind,
    los: bool,
    n_paths: usize,
    f_ch: f64,
    n_snapshots: usize,
}

fn check_row(t_expected: usize, t: f64, h: Complex64, d: f64) -> Result<(), String> {
    if t != t_expected as f64 {
        return Err(format!("expected t_index {t_expected}, found {t}"));
    }
    if !(h.re.is_finite() && h.im.is_finite()) {
        return Err("non-finite coefficient".into());
    }
    if !d.is_finite() || d < 0.0 {
        return Err(format!("delay {d} must be finite and non-negative"));
    }
    Ok(())
}

/// Assembles sources, requiring a common update rate and snapshot count.
fn finish(sources: Vec<(SourceHeader, Vec<PathSeries>)>) -> Result<ChannelSet, ChannelFileError> {
    let Some((first, _)) = sources.first() else {
        return Err(ChannelFileError::Empty);
    };
    let (f_ch, n) = (first.f_ch, first.n_snapshots);
    let mut out = Vec::with_capacity(sources.len());
    for (h, paths) in sources {
        if h.f_ch != f_ch || h.n_snapshots != n {
            return Err(synthrf_core::Error::InvalidArgument(format!(
                "source {} has f_ch {} Hz / {} snapshots, first source has {f_ch} Hz / {n}",
                h.id, h.f_ch, h.n_snapshots
            ))
            .into());
        }
        out.push(SourceChannel::new(h.id, h.kind, h.los, paths)?);
    }
    Ok(ChannelSet::new(out, f_ch, n as f64 / f_ch)?)
}

pub fn read_channel_text<R: BufRead>(r: R) -> Result<ChannelSet, ChannelFileError> {
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.as_deref().map(str::trim_end).ok() == Some(CHANNEL_MAGIC) => {}
        _ => return Err(ChannelFileError::Header),
    }
    let bad = |line: usize, msg: String| ChannelFileError::Malformed { line, msg };
    let mut sources = Vec::new();
    while let Some((ln, line)) = lines.next() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 7 || tok[0] != "source" {
            return Err(bad(ln, format!("expected a source line, found '{line}'")));
        }
        let header = SourceHeader {
            id: tok[1].to_string(),
            kind: tok[2].parse().map_err(|e| bad(ln, format!("{e}")))?,
            los: tok[3].parse().map_err(|_| bad(ln, format!("los must be true/false, found '{}'", tok[3])))?,
            n_paths: tok[4].parse().map_err(|_| bad(ln, format!("bad path count '{}'", tok[4])))?,
            f_ch: tok[5].parse().map_err(|_| bad(ln, format!("bad update rate '{}'", tok[5])))?,
            n_snapshots: tok[6].parse().map_err(|_| bad(ln, format!("bad snapshot count '{}'", tok[6])))?,
        };
        if !(header.f_ch.is_finite() && header.f_ch > 0.0) {
            return Err(bad(ln, "update rate must be positive".into()));
        }
        let mut paths = Vec::with_capacity(header.n_paths);
        for k in 0..header.n_paths {
            let mut h = Vec::with_capacity(header.n_snapshots);
            let mut d = Vec::with_capacity(header.n_snapshots);
            for t in 0..header.n_snapshots {
                let Some((ln, row)) = lines.next() else {
                    return Err(ChannelFileError::Truncated(format!(
                        "source {} path {k} ends at row {t} of {}",
                        header.id, header.n_snapshots
                    )));
                };
                let row = row?;
                let f: Vec<f64> = row
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad(ln, format!("unparseable row '{row}'")))?;
                if f.len() != 4 {
                    return Err(bad(ln, format!("expected 4 fields, found {}", f.len())));
                }
                let c = Complex64::new(f[1], f[2]);
                check_row(t, f[0], c, f[3]).map_err(|m| bad(ln, m))?;
                h.push(c);
                d.push(f[3]);
            }
            paths.push(PathSeries::new(h, d)?);
        }
        sources.push((header, paths));
    }
    finish(sources)
}

fn put_f64<W: Write>(w: &mut W, x: f64) -> io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn kind_code(kind: SourceKind) -> u8 {
    match kind {
        SourceKind::Satellite => 0,
        SourceKind::Haps => 1,
        SourceKind::Gnb => 2,
    }
}

pub fn write_channel_binary<W: Write>(set: &ChannelSet, w: &mut W) -> io::Result<()> {
    w.write_all(CHANNEL_MAGIC.as_bytes())?;
    w.write_all(b"\n")?;
    for s in set.sources() {
        let id = s.source_id().as_bytes();
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id)?;
        w.write_all(&[kind_code(s.kind()), u8::from(s.los())])?;
        w.write_all(&(s.paths().len() as u32).to_le_bytes())?;
        put_f64(w, set.update_rate_hz())?;
        w.write_all(&(s.snapshots() as u64).to_le_bytes())?;
        for p in s.paths() {
            for (t, (h, d)) in p.coefficients().iter().zip(p.delays_s()).enumerate() {
                put_f64(w, t as f64)?;
                put_f64(w, h.re)?;
                put_f64(w, h.im)?;
                put_f64(w, *d)?;
            }
        }
    }
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N], ChannelFileError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => ChannelFileError::Truncated(format!("ends inside {what}")),
        _ => ChannelFileError::Io(e),
    })?;
    Ok(b)
}

pub fn read_channel_binary<R: Read>(mut r: R) -> Result<ChannelSet, ChannelFileError> {
    let mut magic = [0u8; CHANNEL_MAGIC.len() + 1];
    if r.read_exact(&mut magic).is_err() || &magic[..CHANNEL_MAGIC.len()] != CHANNEL_MAGIC.as_bytes() || magic[CHANNEL_MAGIC.len()] != b'\n' {
        return Err(ChannelFileError::Header);
    }
    let bad = |msg: String| ChannelFileError::Malformed { line: 0, msg };
    let mut sources = Vec::new();
    loop {
        let mut first = [0u8; 1];
        if r.read(&mut first)? == 0 {
            break;
        }
        let rest: [u8; 3] = take(&mut r, "source header")?;
        let id_len = u32::from_le_bytes([first[0], rest[0], rest[1], rest[2]]) as usize;
        if id_len == 0 || id_len > 4096 {
            return Err(bad(format!("implausible id length {id_len}")));
        }
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id)
            .map_err(|_| ChannelFileError::Truncated("ends inside source id".into()))?;
        let id = String::from_utf8(id).map_err(|_| bad("source id is not UTF-8".into()))?;
        let [kind, los] = take::<2, _>(&mut r, "source header")?;
        let kind = match kind {
            0 => SourceKind::Satellite,
            1 => SourceKind::Haps,
            2 => SourceKind::Gnb,
            k => return Err(bad(format!("unknown kind code {k}"))),
        };
        let n_paths = u32::from_le_bytes(take(&mut r, "source header")?) as usize;
        let f_ch = f64::from_le_bytes(take(&mut r, "source header")?);
        let n_snapshots = u64::from_le_bytes(take(&mut r, "source header")?) as usize;
        if !(f_ch.is_finite() && f_ch > 0.0) {
            return Err(bad(format!("source {id}: update rate must be positive")));
        }
        let mut paths = Vec::with_capacity(n_paths);
        for k in 0..n_paths {
            let mut h = Vec::with_capacity(n_snapshots);
            let mut d = Vec::with_capacity(n_snapshots);
            for t in 0..n_snapshots {
                let what = format!("source {id} path {k} row {t}");
                let row: [u8; 32] = take(&mut r, &what)?;
                let f = |i: usize| f64::from_le_bytes(row[8 * i..8 * i + 8].try_into().unwrap());
                let c = Complex64::new(f(1), f(2));
                check_row(t, f(0), c, f(3)).map_err(|m| bad(format!("{what}: {m}")))?;
                h.push(c);
                d.push(f(3));
            }
            paths.push(PathSeries::new(h, d)?);
        }
        sources.push((
            SourceHeader {
                id,
                kind,
                los: los != 0,
                n_paths,
                f_ch,
                n_snapshots,
            },
            paths,
        ));
    }
    finish(sources)
}
