//! The built-in device/app power table.
//!
//! One record per (device, app) pair: the four power draws plus the measured
//! round and app-session lengths in seconds. The table ships inside the
//! binary; an identically-formatted file can be loaded from disk to swap in
//! different hardware.
//!
//! Raw rows are kept verbatim, including the ones whose app draw falls below
//! the device's training draw (watching a video can cost less than a training
//! round). Such rows cannot form a valid [`DeviceProfile`], so consumers that
//! need the full draw ordering pick from [`Catalog::schedulable`] instead of
//! the raw rows.

use crate::error::{Error, Result};
use crate::power::DeviceProfile;
use crate::scalar::Float;
use std::path::Path;
use std::sync::OnceLock;

const BUILTIN: &str = include_str!("../data/device_power.csv");

const HEADER: &str =
    "device,app,p_app,p_corun,p_train,p_idle,train_seconds,corun_seconds,idle_estimated";

/// One table row, in the raw measured units (watts, seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub device: String,
    pub app: String,
    pub p_app: f64,
    pub p_corun: f64,
    pub p_train: f64,
    pub p_idle: f64,
    pub train_seconds: f64,
    pub corun_seconds: f64,
    /// True where `p_idle` is extrapolated from `p_train` rather than measured.
    pub idle_estimated: bool,
}

impl CatalogEntry {
    /// Whether the row satisfies the strict draw ordering
    /// `p_corun > p_app > p_train > p_idle > 0` that profiles require.
    pub fn is_ordered(&self) -> bool {
        self.p_corun > self.p_app
            && self.p_app > self.p_train
            && self.p_train > self.p_idle
            && self.p_idle > 0.0
    }

    /// Builds the per-slot profile for this pair, rounding the round length
    /// up to whole slots. Fails on rows outside the draw ordering.
    pub fn profile<F: Float>(&self, slot_len: F) -> Result<DeviceProfile<F>> {
        let d = self.slots(self.train_seconds, slot_len);
        DeviceProfile::new(
            format!("{}/{}", self.device, self.app),
            F::of(self.p_corun),
            F::of(self.p_train),
            F::of(self.p_app),
            F::of(self.p_idle),
            d,
        )
    }

    /// App session length in whole slots (rounded up, at least 1).
    pub fn app_slots<F: Float>(&self, slot_len: F) -> u32 {
        self.slots(self.corun_seconds, slot_len)
    }

    /// Training round length in whole slots (rounded up, at least 1).
    pub fn train_slots<F: Float>(&self, slot_len: F) -> u32 {
        self.slots(self.train_seconds, slot_len)
    }

    fn slots<F: Float>(&self, seconds: f64, slot_len: F) -> u32 {
        let len = slot_len.to_f64().unwrap_or(1.0);
        ((seconds / len).ceil() as u32).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
}

impl Catalog {
    /// The table compiled into the binary.
    pub fn builtin() -> &'static Catalog {
        static CACHE: OnceLock<Catalog> = OnceLock::new();
        CACHE.get_or_init(|| Catalog::parse(BUILTIN).expect("built-in table parses"))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Catalog> {
        Catalog::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Catalog> {
        let mut entries = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let row = raw.trim();
            if row.is_empty() || row.starts_with('#') {
                continue;
            }
            if !saw_header {
                if row != HEADER {
                    return Err(Error::Table {
                        line,
                        msg: format!("expected header `{HEADER}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            entries.push(parse_row(line, row)?);
        }
        if entries.is_empty() {
            return Err(Error::Table {
                line: 0,
                msg: "no data rows".into(),
            });
        }
        Ok(Catalog { entries })
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    /// Device names in first-appearance order.
    pub fn devices(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.device.as_str()) {
                out.push(&e.device);
            }
        }
        out
    }

    /// All rows of one device.
    pub fn rows<'a>(&'a self, device: &str) -> impl Iterator<Item = &'a CatalogEntry> + 'a {
        let device = device.to_string();
        self.entries.iter().filter(move |e| e.device == device)
    }

    pub fn entry(&self, device: &str, app: &str) -> Option<&CatalogEntry> {
        self.entries
            .iter()
            .find(|e| e.device == device && e.app == app)
    }

    /// Rows of one device that satisfy the strict draw ordering, i.e. the
    /// app sessions a scheduler can actually piggyback a round onto.
    pub fn schedulable(&self, device: &str) -> Vec<&CatalogEntry> {
        self.rows(device).filter(|e| e.is_ordered()).collect()
    }
}

fn parse_row(line: usize, row: &str) -> Result<CatalogEntry> {
    let fields: Vec<&str> = row.split(',').map(str::trim).collect();
    if fields.len() != 9 {
        return Err(Error::Table {
            line,
            msg: format!("expected 9 fields, got {}", fields.len()),
        });
    }
    let num = |i: usize, name: &str| -> Result<f64> {
        fields[i].parse::<f64>().map_err(|_| Error::Table {
            line,
            msg: format!("bad {name} `{}`", fields[i]),
        })
    };
    let flag = match fields[8] {
        "true" => true,
        "false" => false,
        other => {
            return Err(Error::Table {
                line,
                msg: format!("bad idle_estimated `{other}` (true/false)"),
            })
        }
    };
    Ok(CatalogEntry {
        device: fields[0].to_string(),
        app: fields[1].to_string(),
        p_app: num(2, "p_app")?,
        p_corun: num(3, "p_corun")?,
        p_train: num(4, "p_train")?,
        p_idle: num(5, "p_idle")?,
        train_seconds: num(6, "train_seconds")?,
        corun_seconds: num(7, "corun_seconds")?,
        idle_estimated: flag,
    })
}
