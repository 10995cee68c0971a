use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::norm_sq;

/// The three agents of the consensus problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Sensor,
    Data,
    Image,
}

impl AgentRole {
    pub const ALL: [AgentRole; 3] = [AgentRole::Sensor, AgentRole::Data, AgentRole::Image];

    pub fn index(self) -> usize {
        match self {
            AgentRole::Sensor => 0,
            AgentRole::Data => 1,
            AgentRole::Image => 2,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            AgentRole::Sensor => "s",
            AgentRole::Data => "d",
            AgentRole::Image => "i",
        }
    }
}

/// An image estimate concatenated with a data-domain estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub image: Vec<f64>,
    pub data: Vec<f64>,
}

impl AugmentedState {
    pub fn new(image: Vec<f64>, data: Vec<f64>) -> Self {
        Self { image, data }
    }

    pub fn zeros(image_len: usize, data_len: usize) -> Self {
        Self::new(vec![0.0; image_len], vec![0.0; data_len])
    }

    /// Splits a flat `(image, data)` vector.
    pub fn from_flat(flat: &[f64], image_len: usize) -> Result<Self> {
        if image_len > flat.len() {
            return Err(Error::shape(format!(
                "image length {image_len} exceeds augmented length {}",
                flat.len()
            )));
        }
        let (i, d) = flat.split_at(image_len);
        Ok(Self::new(i.to_vec(), d.to_vec()))
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.image);
        v.extend_from_slice(&self.data);
        v
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.image.len(), self.data.len())
    }

    pub fn len(&self) -> usize {
        self.image.len() + self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.image.iter().chain(&self.data).all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.image) + norm_sq(&self.data)
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub(crate) fn dist_sq(&self, other: &Self) -> f64 {
        fn d(a: &[f64], b: &[f64]) -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
        }
        d(&self.image, &other.image) + d(&self.data, &other.data)
    }

    /// Elementwise `self = a·self + b·other`.
    pub(crate) fn combine(&mut self, a: f64, b: f64, other: &Self) {
        for (x, y) in self.image.iter_mut().zip(&other.image) {
            *x = a * *x + b * y;
        }
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x = a * *x + b * y;
        }
    }
}

/// One augmented state per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedState {
    parts: [AugmentedState; 3],
}

impl StackedState {
    pub fn new(
        sensor: AugmentedState,
        data: AugmentedState,
        image: AugmentedState,
    ) -> Result<Self> {
        let dims = sensor.dims();
        if data.dims() != dims || image.dims() != dims {
            return Err(Error::shape(format!(
                "stacked components disagree on (image, data) lengths: {:?}, {:?}, {:?}",
                dims,
                data.dims(),
                image.dims()
            )));
        }
        Ok(Self {
            parts: [sensor, data, image],
        })
    }

    /// The same state for every agent.
    pub fn replicate(x: AugmentedState) -> Self {
        Self {
            parts: [x.clone(), x.clone(), x],
        }
    }

    pub fn get(&self, role: AgentRole) -> &AugmentedState {
        &self.parts[role.index()]
    }

    pub fn get_mut(&mut self, role: AgentRole) -> &mut AugmentedState {
        &mut self.parts[role.index()]
    }

    pub fn parts(&self) -> &[AugmentedState; 3] {
        &self.parts
    }

    pub fn into_parts(self) -> [AugmentedState; 3] {
        self.parts
    }

    pub fn dims(&self) -> (usize, usize) {
        self.parts[0].dims()
    }

    pub fn norm(&self) -> f64 {
        self.parts
            .iter()
            .map(AugmentedState::norm_sq)
            .sum::<f64>()
            .sqrt()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.parts
            .iter()
            .zip(&other.parts)
            .map(|(a, b)| a.dist_sq(b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.parts.iter().all(AugmentedState::is_finite)
    }

    pub(crate) fn from_parts_unchecked(parts: [AugmentedState; 3]) -> Self {
        Self { parts }
    }
}
