use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geom::SequenceMeta;
use crate::motion::{WarpMatrix, WarpTable};

const SEQINFO_KEYS: [&str; 7] = ["name", "imWidth", "imHeight", "frameRate", "seqLength", "imDir", "imExt"];

/// Parses a `seqinfo.ini`. The scene kind is left static; it comes from the config.
pub fn parse_seqinfo(text: &str) -> Result<SequenceMeta> {
    let mut kv: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(k + 1, format!("expected `key=value`, got `{line}`")))?;
        let key = key.trim();
        if !SEQINFO_KEYS.contains(&key) {
            log::warn!("seqinfo line {}: unknown key `{key}`", k + 1);
        }
        kv.insert(key, (k + 1, value.trim()));
    }
    fn get<'a>(kv: &BTreeMap<&str, (usize, &'a str)>, key: &str) -> Result<(usize, &'a str)> {
        kv.get(key).copied().ok_or_else(|| Error::config(key, "missing from seqinfo"))
    }
    fn num<T: std::str::FromStr>(kv: &BTreeMap<&str, (usize, &str)>, key: &str) -> Result<T> {
        let (line, v) = get(kv, key)?;
        v.parse()
            .map_err(|_| Error::config(key, format!("line {line}: invalid value `{v}`")))
    }
    let meta = SequenceMeta::new(
        get(&kv, "name")?.1,
        num(&kv, "imWidth")?,
        num(&kv, "imHeight")?,
        num(&kv, "frameRate")?,
        num(&kv, "seqLength")?,
    );
    if !meta.is_valid() {
        return Err(Error::config("seqinfo", "width, height, frame rate and length must be positive"));
    }
    Ok(meta)
}

pub fn write_seqinfo(meta: &SequenceMeta) -> String {
    format!(
        "[Sequence]\nname={}\nframeRate={}\nseqLength={}\nimWidth={}\nimHeight={}\n",
        meta.name, meta.fps, meta.length, meta.width, meta.height
    )
}

/// Parses `frame a11 a12 a13 a21 a22 a23` lines.
pub fn parse_warps(text: &str) -> Result<WarpTable<f64>> {
    let mut table = WarpTable::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 {
            return Err(Error::parse(k + 1, format!("expected 7 fields, got {}", f.len())));
        }
        let frame: u32 = f[0]
            .parse()
            .map_err(|_| Error::parse(k + 1, format!("invalid frame `{}`", f[0])))?;
        let mut v = [0.0; 6];
        for (slot, s) in v.iter_mut().zip(&f[1..]) {
            *slot = s
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| Error::parse(k + 1, format!("invalid matrix entry `{s}`")))?;
        }
        if table.warps.contains_key(&frame) {
            return Err(Error::parse(k + 1, format!("duplicate warp for frame {frame}")));
        }
        table.insert(WarpMatrix {
            frame,
            m: [[v[0], v[1], v[2]], [v[3], v[4], v[5]]],
        });
    }
    Ok(table)
}

/// Writes warps with round-trip exact float formatting.
pub fn write_warps(table: &WarpTable<f64>) -> String {
    let mut out = String::new();
    for (f, w) in &table.warps {
        let [[a, b, c], [d, e, g]] = w.m;
        out.push_str(&format!("{f} {a:?} {b:?} {c:?} {d:?} {e:?} {g:?}\n"));
    }
    out
}

/// Parses a height-sample file of `y h` lines.
pub fn parse_height_samples(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::parse(k + 1, format!("invalid number in `{line}`")))?;
        if f.len() != 2 {
            return Err(Error::parse(k + 1, format!("expected `y h`, got {} fields", f.len())));
        }
        out.push((f[0], f[1]));
    }
    Ok(out)
}
