//! PAC encoding: data insertion, rate-1 convolution, polar transform.

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("expected {expected} data bits, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("carrier length {got} does not match profile length {expected}")]
    CarrierLength { expected: usize, got: usize },
}

/// Spread `data` over the positions selected by `mask`; the rest stay 0.
pub fn insert_data(data: &[u8], mask: &[bool]) -> Result<Vec<u8>, EncodeError> {
    let k = mask.iter().filter(|&&m| m).count();
    if data.len() != k {
        return Err(EncodeError::DataLength {
            expected: k,
            got: data.len(),
        });
    }
    let mut v = vec![0u8; mask.len()];
    let mut src = data.iter();
    for (slot, &m) in v.iter_mut().zip(mask) {
        if m {
            *slot = *src.next().unwrap();
        }
    }
    Ok(v)
}

/// Read the data positions back out of a carrier word.
pub fn extract_data(v: &[u8], mask: &[bool]) -> Result<Vec<u8>, EncodeError> {
    if v.len() != mask.len() {
        return Err(EncodeError::CarrierLength {
            expected: mask.len(),
            got: v.len(),
        });
    }
    Ok(v.iter()
        .zip(mask)
        .filter(|&(_, &m)| m)
        .map(|(&b, _)| b)
        .collect())
}

/// Rate-1 convolution with taps `c` (`c[0]` must be 1):
/// `u[i] = XOR of c[j] * v[i - j]`.
pub fn convolve(v: &[u8], taps: &[u8]) -> Vec<u8> {
    let mut u = vec![0u8; v.len()];
    for i in 0..v.len() {
        let mut acc = 0u8;
        for (j, &c) in taps.iter().enumerate().take(i + 1) {
            acc ^= c & v[i - j];
        }
        u[i] = acc;
    }
    u
}

/// In-place polar transform (the n-fold Kronecker power of [1 0; 1 1]).
/// The transform is an involution: applying it twice is the identity.
pub fn polar_transform_in_place(x: &mut [u8]) {
    debug_assert!(x.len().is_power_of_two());
    let mut width = x.len();
    while width > 1 {
        let half = width / 2;
        for block in x.chunks_exact_mut(width) {
            for j in 0..half {
                block[j] ^= block[j + half];
            }
        }
        width = half;
    }
}

/// Copying wrapper around [`polar_transform_in_place`].
pub fn polar_transform(u: &[u8]) -> Vec<u8> {
    let mut x = u.to_vec();
    polar_transform_in_place(&mut x);
    x
}

/// Full PAC encode: insert, convolve, transform.
pub fn encode(data: &[u8], mask: &[bool], taps: &[u8]) -> Result<Vec<u8>, EncodeError> {
    let v = insert_data(data, mask)?;
    let mut x = convolve(&v, taps);
    polar_transform_in_place(&mut x);
    Ok(x)
}
