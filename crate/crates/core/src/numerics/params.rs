use sha2::{Digest, Sha256};

/// A named collection of f64 tensors visited in a fixed order.
///
/// Gradient buffers use the same type as the parameters they belong to, so an
/// optimiser can walk both in lock step.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&str, usize, usize, &[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, usize, usize, &mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _, _, data| n += data.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |_, _, _, data| out.extend_from_slice(data));
        out
    }

    /// Overwrites every entry from `flat`, in visit order.
    fn assign(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.visit_mut(&mut |_, _, _, data| {
            data.copy_from_slice(&flat[offset..offset + data.len()]);
            offset += data.len();
        });
        debug_assert_eq!(offset, flat.len());
    }

    fn is_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, _, _, data| ok &= data.iter().all(|v| v.is_finite()));
        ok
    }
}

/// Hex SHA-256 over tensor names, shapes and the exact bit patterns of every
/// entry.
pub fn param_hash<P: Parameters + ?Sized>(params: &P) -> String {
    let mut hasher = Sha256::new();
    params.visit(&mut |name, rows, cols, data| {
        hasher.update(name.as_bytes());
        hasher.update((rows as u64).to_le_bytes());
        hasher.update((cols as u64).to_le_bytes());
        for v in data {
            hasher.update(v.to_bits().to_le_bytes());
        }
    });
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

