//! On-disk formats for trained artifacts. Networks and decision models go
//! into small self-describing binary containers (fixed magic, little-endian
//! integers, IEEE-754 doubles) so a round trip is bit-exact; a trained
//! transmission system is a directory of network containers plus a
//! `manifest.txt` of key=value lines tying them together.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gcm::{ExemplarStore, GcmModel};
use crate::nn::{Activation, DenseNetwork, Layer};
use crate::sinfony::SinfonySystem;
use crate::source::ViewSplit;

const NETWORK_MAGIC: &[u8; 8] = b"SDNW0001";
const GCM_MAGIC: &[u8; 8] = b"SDGM0001";
const MANIFEST_NAME: &str = "manifest.txt";

/// Little-endian reader over an in-memory buffer that reports truncation
/// as a format error naming what was being read.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!("file truncated while reading {what}")));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn take_u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn take_f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn take_f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.take_f64(what)).collect()
    }

    fn expect_done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the container payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn check_magic(cursor: &mut Cursor, magic: &[u8; 8], kind: &str) -> Result<()> {
    let found = cursor.take(8, "magic")?;
    if found != magic {
        return Err(Error::Format(format!("not a {kind} container (bad magic {found:02x?})")));
    }
    Ok(())
}

fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn network_bytes(net: &DenseNetwork) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(NETWORK_MAGIC);
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        out.push(layer.activation().tag());
        push_f64s(&mut out, layer.weights());
        push_f64s(&mut out, layer.bias());
    }
    out
}

fn network_from_bytes(buf: &[u8]) -> Result<DenseNetwork> {
    let mut cursor = Cursor::new(buf);
    check_magic(&mut cursor, NETWORK_MAGIC, "network")?;
    let n_layers = cursor.take_u32("layer count")? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let out_dim = cursor.take_u32(&format!("layer {l} output dimension"))? as usize;
        let in_dim = cursor.take_u32(&format!("layer {l} input dimension"))? as usize;
        let activation = Activation::from_tag(cursor.take_u8(&format!("layer {l} activation"))?)?;
        let weights = cursor.take_f64_vec(out_dim * in_dim, &format!("layer {l} weights"))?;
        let bias = cursor.take_f64_vec(out_dim, &format!("layer {l} biases"))?;
        layers.push(Layer::new(in_dim, out_dim, weights, bias, activation)?);
    }
    cursor.expect_done()?;
    DenseNetwork::new(layers)
}

/// Write a network container.
pub fn save_network(net: &DenseNetwork, path: &Path) -> Result<()> {
    fs::write(path, network_bytes(net)).map_err(|e| Error::io(path.to_path_buf(), e))
}

/// Read a network container back, re-running construction validation.
pub fn load_network(path: &Path) -> Result<DenseNetwork> {
    let buf = fs::read(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    network_from_bytes(&buf)
}

/// Write a decision-model container: sensitivity, attention, and the full
/// exemplar memory.
pub fn save_gcm(model: &GcmModel, path: &Path) -> Result<()> {
    let store = model.store();
    let mut out = Vec::new();
    out.extend_from_slice(GCM_MAGIC);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    out.extend_from_slice(&(store.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(store.num_classes() as u32).to_le_bytes());
    out.extend_from_slice(&model.sensitivity().to_le_bytes());
    push_f64s(&mut out, model.attention());
    for exemplar in store.samples() {
        push_f64s(&mut out, exemplar);
    }
    for &label in store.labels() {
        out.extend_from_slice(&(label as u32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path.to_path_buf(), e))
}

/// Read a decision-model container back.
pub fn load_gcm(path: &Path) -> Result<GcmModel> {
    let buf = fs::read(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    let mut cursor = Cursor::new(&buf);
    check_magic(&mut cursor, GCM_MAGIC, "decision model")?;
    let n = cursor.take_u32("exemplar count")? as usize;
    let dim = cursor.take_u32("feature dimension")? as usize;
    let num_classes = cursor.take_u32("class count")? as usize;
    let sensitivity = cursor.take_f64("sensitivity")?;
    let attention = cursor.take_f64_vec(dim, "attention weights")?;
    let samples = (0..n)
        .map(|i| cursor.take_f64_vec(dim, &format!("exemplar {i}")))
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..n)
        .map(|i| cursor.take_u32(&format!("label {i}")).map(|l| l as usize))
        .collect::<Result<Vec<_>>>()?;
    cursor.expect_done()?;
    GcmModel::new(ExemplarStore::new(samples, labels, num_classes)?, attention, sensitivity)
}

/// Save a trained transmission system as a directory: one container per
/// encoder, one for the decoder, and a `manifest.txt` describing the
/// geometry.
pub fn save_sinfony(system: &SinfonySystem, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.to_path_buf(), e))?;
    let (snr_low, snr_high) = system.snr_range_db();
    let view_dims: Vec<String> =
        system.view_split().view_dims().iter().map(|d| d.to_string()).collect();
    let manifest = format!(
        "views={}\nn_tx={}\nview_dims={}\nsnr_low_db={}\nsnr_high_db={}\n",
        system.num_views(),
        system.n_tx(),
        view_dims.join(","),
        snr_low,
        snr_high,
    );
    let manifest_path = dir.join(MANIFEST_NAME);
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(manifest_path.clone(), e))?;
    for (q, encoder) in system.encoders().iter().enumerate() {
        save_network(encoder, &dir.join(format!("encoder_{q}.net")))?;
    }
    save_network(system.decoder(), &dir.join("decoder.net"))
}

fn manifest_value<'a>(manifest: &'a str, key: &str) -> Result<&'a str> {
    manifest
        .lines()
        .find_map(|line| line.strip_prefix(key)?.strip_prefix('='))
        .ok_or_else(|| Error::Format(format!("manifest is missing the {key} entry")))
}

fn parse_manifest_number<T: std::str::FromStr>(manifest: &str, key: &str) -> Result<T> {
    let raw = manifest_value(manifest, key)?;
    raw.parse().map_err(|_| Error::Format(format!("manifest entry {key}={raw} is not a number")))
}

/// Load a transmission system saved by [`save_sinfony`], re-running the
/// geometry validation.
pub fn load_sinfony(dir: &Path) -> Result<SinfonySystem> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let manifest =
        fs::read_to_string(&manifest_path).map_err(|e| Error::io(manifest_path.clone(), e))?;
    let views: usize = parse_manifest_number(&manifest, "views")?;
    let n_tx: usize = parse_manifest_number(&manifest, "n_tx")?;
    let snr_low_db: f64 = parse_manifest_number(&manifest, "snr_low_db")?;
    let snr_high_db: f64 = parse_manifest_number(&manifest, "snr_high_db")?;
    let view_dims = manifest_value(&manifest, "view_dims")?
        .split(',')
        .map(|d| {
            d.trim().parse::<usize>().map_err(|_| {
                Error::Format(format!("manifest view_dims entry {d:?} is not a number"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if view_dims.len() != views {
        return Err(Error::Format(format!(
            "manifest declares {views} views but lists {} view_dims",
            view_dims.len()
        )));
    }
    let encoders = (0..views)
        .map(|q| load_network(&dir.join(format!("encoder_{q}.net"))))
        .collect::<Result<Vec<_>>>()?;
    let decoder = load_network(&dir.join("decoder.net"))?;
    SinfonySystem::new(encoders, decoder, ViewSplit::new(view_dims)?, n_tx, snr_low_db, snr_high_db)
}
