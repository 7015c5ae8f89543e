//! Versioned policy checkpoints.
//!
//! A checkpoint is a JSON container: a metadata header, named flat weight
//! arrays, and a digest over the weight payload so corrupted files are
//! rejected at load time. JSON float round-tripping is exact, so a
//! save/load cycle reproduces `act()` bitwise.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{HeadKind, Linear, Net, NetArch};
use super::{hex_digest, Algo, PolicyHandle, TrainConfig};
use crate::envlab::EnvId;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WeightRecord<T: Scalar> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub config_digest: String,
    pub seed: u64,
    pub final_mean_return: f64,
    pub deterministic: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Checkpoint<T: Scalar> {
    pub format_version: String,
    pub policy_id: String,
    pub algo: Algo,
    pub env_id: EnvId,
    pub scalar: String,
    pub arch: NetArch,
    pub train_config: TrainConfig,
    pub provenance: Provenance,
    pub weights_digest: String,
    pub weights: Vec<WeightRecord<T>>,
}

fn rec2<T: Scalar>(name: String, a: &ndarray::Array2<T>) -> WeightRecord<T> {
    WeightRecord { name, shape: vec![a.nrows(), a.ncols()], data: a.iter().copied().collect() }
}

fn rec1<T: Scalar>(name: String, b: &ndarray::Array1<T>) -> WeightRecord<T> {
    WeightRecord { name, shape: vec![b.len()], data: b.to_vec() }
}

fn weight_records<T: Scalar>(net: &Net<T>) -> Vec<WeightRecord<T>> {
    let mut out = Vec::new();
    for (i, l) in net.torso.iter().enumerate() {
        out.push(rec2(format!("torso.{i}.weight"), &l.w));
        out.push(rec1(format!("torso.{i}.bias"), &l.b));
    }
    out.push(rec2("head_main.weight".into(), &net.head_main.w));
    out.push(rec1("head_main.bias".into(), &net.head_main.b));
    out.push(rec2("head_aux.weight".into(), &net.head_aux.w));
    out.push(rec1("head_aux.bias".into(), &net.head_aux.b));
    out
}

fn digest_weights<T: Scalar>(weights: &[WeightRecord<T>]) -> String {
    let mut bytes = Vec::new();
    for rec in weights {
        bytes.extend_from_slice(rec.name.as_bytes());
        for &d in &rec.shape {
            bytes.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &rec.data {
            bytes.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    hex_digest(&bytes)
}

pub fn to_checkpoint<T: Scalar>(policy: &PolicyHandle<T>) -> Checkpoint<T> {
    let weights = weight_records(&policy.net);
    let weights_digest = digest_weights(&weights);
    Checkpoint {
        format_version: FORMAT_VERSION.into(),
        policy_id: policy.policy_id.clone(),
        algo: policy.algo,
        env_id: policy.env_id,
        scalar: T::NAME.into(),
        arch: policy.net.arch(),
        train_config: policy.train_config.clone(),
        provenance: Provenance {
            config_digest: policy.train_config.digest(),
            seed: policy.train_config.seed,
            final_mean_return: policy.final_mean_return,
            deterministic: true,
        },
        weights_digest,
        weights,
    }
}

pub fn save_checkpoint<T: Scalar>(policy: &PolicyHandle<T>, path: &Path) -> Result<()> {
    let ckpt = to_checkpoint(policy);
    let text = serde_json::to_string(&ckpt)?;
    std::fs::write(path, text)?;
    Ok(())
}

fn major_of(version: &str) -> Option<u64> {
    version.split('.').next()?.parse().ok()
}

pub fn from_checkpoint<T: Scalar>(ckpt: Checkpoint<T>) -> Result<PolicyHandle<T>> {
    let found_major = major_of(&ckpt.format_version)
        .ok_or_else(|| Error::Integrity(format!("bad version string {}", ckpt.format_version)))?;
    let supported_major = major_of(FORMAT_VERSION).expect("valid constant");
    if found_major > supported_major {
        return Err(Error::FormatVersion {
            found: ckpt.format_version.clone(),
            supported: FORMAT_VERSION.into(),
        });
    }
    if ckpt.scalar != T::NAME {
        return Err(Error::Integrity(format!(
            "checkpoint stores {} weights but {} was requested",
            ckpt.scalar,
            T::NAME
        )));
    }
    let recomputed = digest_weights(&ckpt.weights);
    if recomputed != ckpt.weights_digest {
        return Err(Error::Integrity("weight digest mismatch; file corrupted".into()));
    }

    let mut torso = Vec::new();
    let mut main: Option<Linear<T>> = None;
    let mut aux: Option<Linear<T>> = None;
    let mut pending_w: Option<(String, ndarray::Array2<T>)> = None;
    for rec in ckpt.weights {
        match rec.shape.len() {
            2 => {
                let arr =
                    ndarray::Array2::from_shape_vec((rec.shape[0], rec.shape[1]), rec.data)
                        .map_err(|e| Error::Integrity(e.to_string()))?;
                pending_w = Some((rec.name, arr));
            }
            1 => {
                let (wname, w) = pending_w
                    .take()
                    .ok_or_else(|| Error::Integrity("bias before weight".into()))?;
                let b = ndarray::Array1::from_vec(rec.data);
                let layer = Linear { w, b };
                if wname.starts_with("torso.") {
                    torso.push(layer);
                } else if wname.starts_with("head_main") {
                    main = Some(layer);
                } else if wname.starts_with("head_aux") {
                    aux = Some(layer);
                } else {
                    return Err(Error::Integrity(format!("unknown weight record {wname}")));
                }
            }
            _ => return Err(Error::Integrity("weight record with bad rank".into())),
        }
    }
    let kind = match ckpt.algo {
        Algo::Dqn => HeadKind::Dueling,
        Algo::A2c | Algo::Ppo => HeadKind::ActorCritic,
    };
    let net = Net {
        torso,
        head_main: main.ok_or_else(|| Error::Integrity("missing main head".into()))?,
        head_aux: aux.ok_or_else(|| Error::Integrity("missing aux head".into()))?,
        kind,
    };
    let mut handle = PolicyHandle::from_net(
        ckpt.policy_id,
        ckpt.algo,
        ckpt.env_id,
        net,
        ckpt.train_config,
        ckpt.provenance.final_mean_return,
    );
    handle.final_mean_return = ckpt.provenance.final_mean_return;
    Ok(handle)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<PolicyHandle<T>> {
    let text = std::fs::read_to_string(path)?;
    let ckpt: Checkpoint<T> = serde_json::from_str(&text)?;
    from_checkpoint(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policylab::{probe_actions, probe_states};
    use crate::seed;

    fn small_policy() -> PolicyHandle<f64> {
        let arch = NetArch {
            input_dim: 10,
            hidden: vec![6],
            action_count: 4,
            kind: HeadKind::Dueling,
        };
        let net = Net::new(&arch, &mut seed::rng(3, "ckpt-test", 0));
        PolicyHandle::from_net(
            "ckpt-test",
            Algo::Dqn,
            EnvId::Rally,
            net,
            TrainConfig::default_for(Algo::Dqn, 3),
            1.5,
        )
    }

    #[test]
    fn round_trip_preserves_actions_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt.json");
        let policy = small_policy();
        save_checkpoint(&policy, &path).unwrap();
        let loaded = load_checkpoint::<f64>(&path).unwrap();
        let probes = probe_states::<f64>(10, 64, 11);
        assert_eq!(probe_actions(&policy, &probes), probe_actions(&loaded, &probes));
        assert_eq!(policy.weights_digest(), loaded.weights_digest());
        assert_eq!(loaded.final_mean_return, 1.5);
    }

    #[test]
    fn corrupted_file_fails_integrity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt.json");
        let policy = small_policy();
        save_checkpoint(&policy, &path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        // Flip one digit inside the first weight payload.
        let idx = text.find("\"data\":[").unwrap() + 9;
        let bytes = unsafe { text.as_bytes_mut() };
        for b in bytes[idx..].iter_mut() {
            if b.is_ascii_digit() && *b != b'9' {
                *b += 1;
                break;
            }
        }
        std::fs::write(&path, text).unwrap();
        let err = load_checkpoint::<f64>(&path).err().expect("must fail");
        assert!(matches!(err, Error::Integrity(_)) || matches!(err, Error::Serde(_)));
    }

    #[test]
    fn newer_major_version_names_both_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt.json");
        let policy = small_policy();
        let mut ckpt = to_checkpoint(&policy);
        ckpt.format_version = "2.3".into();
        std::fs::write(&path, serde_json::to_string(&ckpt).unwrap()).unwrap();
        let err = load_checkpoint::<f64>(&path).err().expect("must fail");
        let msg = err.to_string();
        assert!(msg.contains("2.3") && msg.contains("1.0"), "got: {msg}");
    }

    #[test]
    fn scalar_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt.json");
        save_checkpoint(&small_policy(), &path).unwrap();
        assert!(load_checkpoint::<f32>(&path).is_err());
    }
}
