//! Embedding space, alignment scoring and the synthetic scene/text encoder.

use std::fmt;
use std::sync::Arc;

use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::navigation::Terrain;
use crate::task::TaskKind;

pub const DEFAULT_DIM: usize = 512;
pub const DEFAULT_WINDOW: usize = 16;

/// Unit-norm vector shared cheaply between frames, clusters and queries.
#[derive(Clone, PartialEq)]
pub struct Embedding(Arc<[f32]>);

impl Embedding {
    /// Normalizes `values` to unit length.
    pub fn new(values: &[f32]) -> Result<Self> {
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        Self::from_f64(&v)
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding values"));
        }
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::DegenerateEmbedding);
        }
        Ok(Embedding(values.iter().map(|x| (x / norm) as f32).collect()))
    }

    /// Wraps raw values without renormalizing. Used by deserialization so that
    /// stored vectors round-trip bit for bit.
    fn from_raw(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding values"));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateEmbedding);
        }
        Ok(Embedding(values.into()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&x| x as f64).collect()
    }

    pub fn negated(&self) -> Embedding {
        Embedding(self.0.iter().map(|x| -x).collect())
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    /// Short hex digest of the exact stored bits.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for x in self.0.iter() {
            h.update(x.to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn to_base64(&self) -> String {
        let mut bytes = Vec::with_capacity(self.0.len() * 4);
        for x in self.0.iter() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        base64::engine::general_purpose::STANDARD.encode(bytes)
    }

    fn from_base64(s: &str) -> std::result::Result<Self, String> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(|e| e.to_string())?;
        if bytes.len() % 4 != 0 {
            return Err("embedding byte length is not a multiple of 4".into());
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Embedding::from_raw(values).map_err(|e| e.to_string())
    }
}

impl fmt::Debug for Embedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Embedding(d={}, {})", self.dim(), self.digest())
    }
}

impl Serialize for Embedding {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_base64())
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Embedding::from_base64(&s).map_err(serde::de::Error::custom)
    }
}

/// Dot product accumulated in f64 over four lanes.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] as f64 * y[i] as f64;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += *x as f64 * *y as f64;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Scaled cosine similarity, 100 x cos, clamped to [-100, 100].
pub fn alignment_score(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    Ok(score(a, b))
}

/// Unchecked variant for callers that validated dimensions already.
#[inline]
pub(crate) fn score(a: &Embedding, b: &Embedding) -> f64 {
    (100.0 * dot(&a.0, &b.0)).clamp(-100.0, 100.0)
}

/// Things the encoder can recognize in a scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Tree,
    Cow,
    Sheep,
    Dirt,
    Water,
    Sand,
    Grass,
    ZombieBurning,
    SugarCane,
    Spider,
    Spawner,
    House,
    Flower,
    Well,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 14] = [
        FeatureKind::Tree,
        FeatureKind::Cow,
        FeatureKind::Sheep,
        FeatureKind::Dirt,
        FeatureKind::Water,
        FeatureKind::Sand,
        FeatureKind::Grass,
        FeatureKind::ZombieBurning,
        FeatureKind::SugarCane,
        FeatureKind::Spider,
        FeatureKind::Spawner,
        FeatureKind::House,
        FeatureKind::Flower,
        FeatureKind::Well,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// How strongly a kind dominates a scene it appears in.
    pub fn saliency(self) -> f64 {
        match self {
            FeatureKind::Tree => 1.0,
            FeatureKind::Cow | FeatureKind::Sheep => 0.6,
            FeatureKind::Dirt => 0.8,
            FeatureKind::Water => 1.3,
            FeatureKind::Sand => 1.0,
            FeatureKind::Grass => 0.8,
            FeatureKind::ZombieBurning => 1.5,
            FeatureKind::SugarCane => 1.3,
            FeatureKind::Spider => 1.3,
            FeatureKind::Spawner => 1.0,
            FeatureKind::House => 1.5,
            FeatureKind::Flower | FeatureKind::Well => 0.5,
        }
    }
}

/// One recognizable thing in view, relative to the agent's cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VisibleFeature {
    pub kind: FeatureKind,
    pub dx: i32,
    pub dy: i32,
}

/// Symbolic stand-in for a rendered frame.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    /// Sorted and deduplicated.
    pub visible: Vec<VisibleFeature>,
    /// Terrain counts in view, indexed by [`Terrain::index`].
    pub terrain: [u16; Terrain::COUNT],
    pub yaw_bucket: i16,
}

impl SceneDescriptor {
    pub fn contains(&self, kind: FeatureKind) -> bool {
        self.visible.iter().any(|v| v.kind == kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptRole {
    Query,
    Execute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub seed: u64,
    pub dim: usize,
    /// Maximum per-call rotation, radians.
    pub noise_angle: f64,
    pub window: usize,
    /// Distance at which a feature's weight falls to 2/3.
    pub falloff: f64,
    pub background_weight: f64,
    /// Kinds the encoder accepts; `None` registers all of them.
    pub registry: Option<Vec<FeatureKind>>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            seed: 0x5eed,
            dim: DEFAULT_DIM,
            noise_angle: 0.05,
            window: DEFAULT_WINDOW,
            falloff: 8.0,
            background_weight: 0.15,
            registry: None,
        }
    }
}

const NOISE_BANK: usize = 64;

/// Deterministic encoder mapping scene windows and task prompts into one space.
///
/// Base vectors of features, terrain textures and execute prompts are mutually
/// orthogonal, so distinct kinds score 0 against each other.
#[derive(Debug)]
pub struct EncoderOracle {
    config: OracleConfig,
    features: Vec<Vec<f64>>,
    terrain: Vec<Vec<f64>>,
    execute: Vec<Vec<f64>>,
    noise: Vec<Vec<f64>>,
    registered: [bool; FeatureKind::ALL.len()],
}

impl EncoderOracle {
    pub fn new(config: OracleConfig) -> Result<Self> {
        let basis_count = FeatureKind::ALL.len() + Terrain::COUNT + TaskKind::ALL.len();
        if config.dim < basis_count {
            return Err(Error::InvalidParameter {
                name: "oracle.dim",
                reason: format!("must be at least {basis_count}"),
            });
        }
        if !(config.noise_angle >= 0.0 && config.noise_angle.is_finite()) {
            return Err(Error::InvalidParameter { name: "oracle.noise_angle", reason: "must be >= 0".into() });
        }
        if config.window == 0 {
            return Err(Error::InvalidParameter { name: "oracle.window", reason: "must be >= 1".into() });
        }
        if !(config.falloff > 0.0) || !(config.background_weight >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "oracle.falloff",
                reason: "falloff must be > 0 and background_weight >= 0".into(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(basis_count);
        while basis.len() < basis_count {
            let mut v: Vec<f64> = (0..config.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
            let n = norm(&v);
            if n > 1e-6 {
                v.iter_mut().for_each(|x| *x /= n);
                basis.push(v);
            }
        }
        let execute = basis.split_off(FeatureKind::ALL.len() + Terrain::COUNT);
        let terrain = basis.split_off(FeatureKind::ALL.len());
        let noise = (0..NOISE_BANK)
            .map(|_| {
                let v: Vec<f64> = (0..config.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = norm(&v);
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let mut registered = [config.registry.is_none(); FeatureKind::ALL.len()];
        if let Some(list) = &config.registry {
            for k in list {
                registered[k.index()] = true;
            }
        }
        Ok(EncoderOracle { config, features: basis, terrain, execute, noise, registered })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn window(&self) -> usize {
        self.config.window
    }

    pub fn is_registered(&self, kind: FeatureKind) -> bool {
        self.registered[kind.index()]
    }

    /// Base embedding of a feature kind.
    pub fn base(&self, kind: FeatureKind) -> Result<Embedding> {
        self.check(kind)?;
        Embedding::from_f64(&self.features[kind.index()])
    }

    fn check(&self, kind: FeatureKind) -> Result<()> {
        if self.is_registered(kind) {
            Ok(())
        } else {
            Err(Error::UnknownKind(format!("{kind:?}")))
        }
    }

    /// Noise-free unit vector of one descriptor.
    pub fn encode_descriptor(&self, desc: &SceneDescriptor) -> Result<Vec<f64>> {
        let dim = self.config.dim;
        let mut v = vec![0.0f64; dim];
        let mut nearest = [f64::INFINITY; FeatureKind::ALL.len()];
        for f in &desc.visible {
            self.check(f.kind)?;
            let d = ((f.dx * f.dx + f.dy * f.dy) as f64).sqrt();
            let slot = &mut nearest[f.kind.index()];
            if d < *slot {
                *slot = d;
            }
        }
        for (i, &d) in nearest.iter().enumerate() {
            if d.is_finite() {
                let w = FeatureKind::ALL[i].saliency() / (1.0 + d / (2.0 * self.config.falloff));
                axpy(&mut v, w, &self.features[i]);
            }
        }
        let total: u32 = desc.terrain.iter().map(|&c| c as u32).sum();
        if total > 0 && self.config.background_weight > 0.0 {
            let mut bg = vec![0.0f64; dim];
            for (t, &c) in desc.terrain.iter().enumerate() {
                if c > 0 {
                    axpy(&mut bg, c as f64, &self.terrain[t]);
                }
            }
            let n = norm(&bg);
            axpy(&mut v, self.config.background_weight / n, &bg);
        }
        let n = norm(&v);
        if n < 1e-12 {
            // Nothing in view at all: fall back to the flat-ground texture.
            v.copy_from_slice(&self.terrain[Terrain::Flat.index()]);
        } else {
            v.iter_mut().for_each(|x| *x /= n);
        }
        Ok(v)
    }

    /// Encodes a window of descriptors (oldest first). `nonce` seeds the
    /// per-call noise rotation; with `noise_angle = 0` it has no effect.
    pub fn encode_scene(&self, window: &[SceneDescriptor], nonce: u64) -> Result<Embedding> {
        if window.is_empty() {
            return Err(Error::EmptyInput("scene window"));
        }
        let start = window.len().saturating_sub(self.config.window);
        let vecs = window[start..]
            .iter()
            .map(|d| self.encode_descriptor(d))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[f64]> = vecs.iter().map(|v| v.as_slice()).collect();
        self.pool(&refs, nonce)
    }

    fn pool(&self, vecs: &[&[f64]], nonce: u64) -> Result<Embedding> {
        let mut mean = vec![0.0f64; self.config.dim];
        for v in vecs {
            for (m, x) in mean.iter_mut().zip(v.iter()) {
                *m += x;
            }
        }
        let n = norm(&mean);
        if n < 1e-12 {
            return Err(Error::DegenerateEmbedding);
        }
        mean.iter_mut().for_each(|x| *x /= n);
        self.rotate(&mut mean, nonce);
        Embedding::from_f64(&mean)
    }

    fn rotate(&self, v: &mut [f64], nonce: u64) {
        if self.config.noise_angle == 0.0 {
            return;
        }
        let h = splitmix(self.config.seed ^ splitmix(nonce));
        let theta = self.config.noise_angle * ((h >> 11) as f64 / (1u64 << 53) as f64);
        let mut idx = (h % NOISE_BANK as u64) as usize;
        for _ in 0..NOISE_BANK {
            let b = &self.noise[idx];
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            let mut u: Vec<f64> = b.iter().zip(v.iter()).map(|(y, x)| y - p * x).collect();
            let n = norm(&u);
            if n > 1e-9 {
                u.iter_mut().for_each(|x| *x /= n);
                let (s, c) = theta.sin_cos();
                for (x, y) in v.iter_mut().zip(&u) {
                    *x = c * *x + s * y;
                }
                return;
            }
            idx = (idx + 1) % NOISE_BANK;
        }
    }

    /// Prompt embedding for a task. The query role points at the task's
    /// resource feature; the execute role is a separate instruction vector.
    pub fn encode_task(&self, task: TaskKind, role: PromptRole) -> Result<Embedding> {
        self.check(task.query_feature())?;
        match role {
            PromptRole::Query => Embedding::from_f64(&self.features[task.query_feature().index()]),
            PromptRole::Execute => {
                let i = TaskKind::ALL.iter().position(|&k| k == task).unwrap_or(0);
                Embedding::from_f64(&self.execute[i])
            }
        }
    }
}

/// Incremental encoder over the last `window` descriptors of a stream.
/// Produces the same embedding as [`EncoderOracle::encode_scene`] on that window.
#[derive(Debug)]
pub struct SceneStream {
    oracle: Arc<EncoderOracle>,
    ring: std::collections::VecDeque<(SceneDescriptor, Arc<Vec<f64>>)>,
}

impl SceneStream {
    pub fn new(oracle: Arc<EncoderOracle>) -> Self {
        let cap = oracle.window();
        SceneStream { oracle, ring: std::collections::VecDeque::with_capacity(cap + 1) }
    }

    pub fn oracle(&self) -> &Arc<EncoderOracle> {
        &self.oracle
    }

    pub fn push(&mut self, desc: &SceneDescriptor) -> Result<()> {
        let vec = match self.ring.back() {
            Some((last, v)) if last == desc => Arc::clone(v),
            _ => Arc::new(self.oracle.encode_descriptor(desc)?),
        };
        self.ring.push_back((desc.clone(), vec));
        while self.ring.len() > self.oracle.window() {
            self.ring.pop_front();
        }
        Ok(())
    }

    pub fn encode(&self, nonce: u64) -> Result<Embedding> {
        if self.ring.is_empty() {
            return Err(Error::EmptyInput("scene window"));
        }
        let refs: Vec<&[f64]> = self.ring.iter().map(|(_, v)| v.as_slice()).collect();
        self.oracle.pool(&refs, nonce)
    }

    pub fn clear(&mut self) {
        self.ring.clear();
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
