use crate::{Error, Result};

/// Largest flattened state count accepted by [`StateSpace::new`].
pub const MAX_STATES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Absorbing mask diffusion; the mask symbol is the last vocabulary index.
    Masked,
    /// Uniform diffusion whose stationary law is uniform over the vocabulary.
    Uniform,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Masked => "masked",
            Mode::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "masked" | "mask" => Ok(Mode::Masked),
            "uniform" => Ok(Mode::Uniform),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

/// `d` tokens over a vocabulary of `V` symbols, flattened lexicographically
/// with position 0 most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateSpace {
    vocab_size: usize,
    dims: usize,
    mode: Mode,
    size: usize,
}

impl StateSpace {
    pub fn new(vocab_size: usize, dims: usize, mode: Mode) -> Result<Self> {
        if vocab_size == 0 || dims == 0 {
            return Err(Error::InvalidSpace(
                "vocabulary size and dimension must be positive".into(),
            ));
        }
        if mode == Mode::Masked && vocab_size < 2 {
            return Err(Error::InvalidSpace(
                "masked mode needs at least one token symbol besides the mask".into(),
            ));
        }
        let mut size: usize = 1;
        for _ in 0..dims {
            size = size
                .checked_mul(vocab_size)
                .filter(|&s| s <= MAX_STATES)
                .ok_or_else(|| {
                    Error::InvalidSpace(format!(
                        "{vocab_size}^{dims} states exceeds the cap of {MAX_STATES}"
                    ))
                })?;
        }
        Ok(Self {
            vocab_size,
            dims,
            mode,
            size,
        })
    }

    pub fn masked(vocab_size: usize, dims: usize) -> Result<Self> {
        Self::new(vocab_size, dims, Mode::Masked)
    }

    pub fn uniform(vocab_size: usize, dims: usize) -> Result<Self> {
        Self::new(vocab_size, dims, Mode::Uniform)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Total number of flattened states, `V^d`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mask_index(&self) -> Option<usize> {
        match self.mode {
            Mode::Masked => Some(self.vocab_size - 1),
            Mode::Uniform => None,
        }
    }

    /// Number of non-mask symbols.
    pub fn token_count(&self) -> usize {
        match self.mode {
            Mode::Masked => self.vocab_size - 1,
            Mode::Uniform => self.vocab_size,
        }
    }

    pub fn is_mask(&self, symbol: usize) -> bool {
        self.mask_index() == Some(symbol)
    }

    pub fn flatten(&self, tokens: &[usize]) -> Result<usize> {
        if tokens.len() != self.dims {
            return Err(Error::Shape(format!(
                "expected {} tokens, got {}",
                self.dims,
                tokens.len()
            )));
        }
        let mut idx = 0;
        for &t in tokens {
            if t >= self.vocab_size {
                return Err(Error::Shape(format!(
                    "token {t} outside vocabulary of size {}",
                    self.vocab_size
                )));
            }
            idx = idx * self.vocab_size + t;
        }
        Ok(idx)
    }

    pub fn unflatten(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims];
        self.unflatten_into(index, &mut out);
        out
    }

    pub fn unflatten_into(&self, mut index: usize, out: &mut [usize]) {
        debug_assert!(index < self.size);
        for slot in out.iter_mut().rev() {
            *slot = index % self.vocab_size;
            index /= self.vocab_size;
        }
    }

    /// Symbol at `position` of the flattened state `index`.
    pub fn token_at(&self, index: usize, position: usize) -> usize {
        let stride = self.stride(position);
        (index / stride) % self.vocab_size
    }

    /// Flattened index obtained by replacing the symbol at `position`.
    pub fn with_token(&self, index: usize, position: usize, symbol: usize) -> usize {
        let stride = self.stride(position);
        let current = (index / stride) % self.vocab_size;
        index - current * stride + symbol * stride
    }

    /// Flattened stride of `position` (position 0 is most significant).
    pub fn stride(&self, position: usize) -> usize {
        self.vocab_size.pow((self.dims - 1 - position) as u32)
    }

    pub fn masked_count(&self, index: usize) -> usize {
        match self.mask_index() {
            None => 0,
            Some(m) => (0..self.dims).filter(|&k| self.token_at(index, k) == m).count(),
        }
    }

    /// The all-mask state, when the space is masked.
    pub fn all_mask_state(&self) -> Option<usize> {
        self.mask_index().map(|m| {
            (0..self.dims).fold(0, |acc, _| acc * self.vocab_size + m)
        })
    }

    /// Position at which two states differ, if they differ at exactly one.
    pub fn single_difference(&self, a: usize, b: usize) -> Option<usize> {
        let mut found = None;
        for k in 0..self.dims {
            if self.token_at(a, k) != self.token_at(b, k) {
                if found.is_some() {
                    return None;
                }
                found = Some(k);
            }
        }
        found
    }
}
