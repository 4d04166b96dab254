//! Self-describing checkpoint container: run configuration plus every
//! stored tensor as key → shape → row-major f64 payload. JSON with
//! shortest-round-trip number rendering, so save/load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::network::{Arch, NormKind};
use crate::layers::{build_network, Network};
use crate::norm::Normalizer;
use crate::rng::Rng;
use crate::train::TrainConfig;

pub const FORMAT: &str = "bintabl.checkpoint.v1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub arch: Arch,
    pub norm: NormKind,
    pub train: TrainConfig,
    /// Which of the protocol runs this model came from.
    pub run_index: usize,
    /// BiN only: feature path divided by the temporal std.
    pub bin_literal_divisor: bool,
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    key: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    config: CheckpointConfig,
    tensors: Vec<TensorRecord>,
}

pub fn save(path: &Path, net: &Network, config: &CheckpointConfig) -> Result<()> {
    let tensors = net
        .slots()
        .into_iter()
        .map(|s| TensorRecord {
            key: s.name,
            rows: s.rows,
            cols: s.cols,
            data: s.values.to_vec(),
        })
        .collect();
    let checkpoint = Checkpoint {
        format: FORMAT.to_string(),
        config: config.clone(),
        tensors,
    };
    let json = serde_json::to_string_pretty(&checkpoint).map_err(|e| Error::Format {
        path: path.display().to_string(),
        what: format!("cannot encode checkpoint: {e}"),
    })?;
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load(path: &Path) -> Result<(Network, CheckpointConfig)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let checkpoint: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        what: format!("not a checkpoint: {e}"),
    })?;
    if checkpoint.format != FORMAT {
        return Err(Error::Format {
            path: path.display().to_string(),
            what: format!("unknown checkpoint format {:?}", checkpoint.format),
        });
    }
    // Rebuild the topology, then overwrite every tensor by key.
    let mut rng = Rng::new(0);
    let mut net = build_network(checkpoint.config.arch, checkpoint.config.norm, &mut rng);
    net.dropout = checkpoint.config.train.dropout;
    if let Normalizer::Bin(p) = &mut net.normalizer {
        p.literal_feature_divisor = checkpoint.config.bin_literal_divisor;
    }

    let mut loaded = std::collections::BTreeSet::new();
    {
        let mut slots = net.slots_mut();
        for record in &checkpoint.tensors {
            let slot = slots
                .iter_mut()
                .find(|s| s.name == record.key)
                .ok_or_else(|| Error::Format {
                    path: path.display().to_string(),
                    what: format!("checkpoint tensor {:?} has no slot in the model", record.key),
                })?;
            if (slot.rows, slot.cols) != (record.rows, record.cols)
                || record.data.len() != record.rows * record.cols
            {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    what: format!(
                        "tensor {:?} is {}x{} with {} values, model expects {}x{}",
                        record.key,
                        record.rows,
                        record.cols,
                        record.data.len(),
                        slot.rows,
                        slot.cols
                    ),
                });
            }
            slot.values.copy_from_slice(&record.data);
            loaded.insert(record.key.clone());
        }
        for slot in &slots {
            if !loaded.contains(&slot.name) {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    what: format!("checkpoint is missing tensor {:?}", slot.name),
                });
            }
        }
    }
    Ok((net, checkpoint.config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn temp_path(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("bintabl-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample_config(arch: Arch, norm: NormKind) -> CheckpointConfig {
        CheckpointConfig {
            arch,
            norm,
            train: TrainConfig::default(),
            run_index: 0,
            bin_literal_divisor: false,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = Rng::new(31);
        let mut net = build_network(Arch::C, NormKind::Bin, &mut rng);
        // Push irrational-looking values through every tensor.
        for slot in net.slots_mut() {
            for (i, v) in slot.values.iter_mut().enumerate() {
                *v = (*v + i as f64 * 0.001).sin() * std::f64::consts::PI;
            }
        }
        net.enforce_constraints();
        let path = temp_path("roundtrip.json");
        save(&path, &net, &sample_config(Arch::C, NormKind::Bin)).unwrap();
        let (loaded, config) = load(&path).unwrap();
        assert_eq!(config.run_index, 0);

        let a = net.slots();
        let b = loaded.slots();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.values, y.values, "tensor {} must round-trip bit-exactly", x.name);
        }
    }

    #[test]
    fn batchnorm_buffers_are_stored() {
        let mut rng = Rng::new(3);
        let mut net = build_network(Arch::B, NormKind::BatchNorm, &mut rng);
        if let Normalizer::BatchNorm(p) = &mut net.normalizer {
            p.running_mean = crate::matrix::Matrix::filled(40, 10, 0.123456789);
        }
        let path = temp_path("bn-buffers.json");
        save(&path, &net, &sample_config(Arch::B, NormKind::BatchNorm)).unwrap();
        let (loaded, _) = load(&path).unwrap();
        if let Normalizer::BatchNorm(p) = &loaded.normalizer {
            assert_eq!(p.running_mean.get(0, 0), 0.123456789);
        } else {
            panic!("normalizer kind lost");
        }
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let mut rng = Rng::new(3);
        let net = build_network(Arch::B, NormKind::None, &mut rng);
        let path = temp_path("truncated.json");
        save(&path, &net, &sample_config(Arch::B, NormKind::None)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mangled = text.replace("\"layer0.w1\"", "\"layer0.w1-missing\"");
        fs::write(&path, mangled).unwrap();
        assert!(load(&path).is_err());
    }
}
