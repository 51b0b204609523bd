//! TLSH locality-sensitive digests.
//!
//! Follows the published 128-bucket / 1-byte-checksum construction: a 5-byte
//! sliding window feeds six Pearson-permuted triplet hashes into 128 buckets,
//! bucket counts are graded against their quartiles into 2-bit codes, and the
//! distance metric combines header differences (length, quartile ratios,
//! checksum) with per-bucket code differences.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of effective buckets.
pub const BUCKETS: usize = 128;
/// Bytes of packed 2-bit bucket codes.
pub const CODE_SIZE: usize = 32;
/// Minimum input length (after normalization) that can be hashed.
pub const MIN_INPUT_LEN: usize = 50;

/// Pearson's sample random permutation table.
const V_TABLE: [u8; 256] = [
    1, 87, 49, 12, 176, 178, 102, 166, 121, 193, 6, 84, 249, 230, 44, 163, 14, 197, 213, 181, 161,
    85, 218, 80, 64, 239, 24, 226, 236, 142, 38, 200, 110, 177, 104, 103, 141, 253, 255, 50, 77,
    101, 81, 18, 45, 96, 31, 222, 25, 107, 190, 70, 86, 237, 240, 34, 72, 242, 20, 214, 244, 227,
    149, 235, 97, 234, 57, 22, 60, 250, 82, 175, 208, 5, 127, 199, 111, 62, 135, 248, 174, 169,
    211, 58, 66, 154, 106, 195, 245, 171, 17, 187, 182, 179, 0, 243, 132, 56, 148, 75, 128, 133,
    158, 100, 130, 126, 91, 13, 153, 246, 216, 219, 119, 68, 223, 78, 83, 88, 201, 99, 122, 11, 92,
    32, 136, 114, 52, 10, 138, 30, 48, 183, 156, 35, 61, 26, 143, 74, 251, 94, 129, 162, 63, 152,
    170, 7, 115, 167, 241, 206, 3, 150, 55, 59, 151, 220, 90, 53, 23, 131, 125, 173, 15, 238, 79,
    95, 89, 16, 105, 137, 225, 224, 217, 160, 37, 123, 118, 73, 2, 157, 46, 116, 9, 145, 134, 228,
    207, 212, 202, 215, 69, 229, 27, 188, 67, 124, 168, 252, 42, 4, 29, 108, 21, 247, 19, 205, 39,
    203, 233, 40, 186, 147, 198, 192, 155, 33, 164, 191, 98, 204, 165, 180, 117, 76, 140, 36, 210,
    172, 41, 54, 159, 8, 185, 232, 113, 196, 231, 47, 146, 120, 51, 65, 28, 144, 254, 221, 93, 189,
    194, 139, 112, 43, 71, 109, 184, 209,
];

/// Distance contribution of one packed code byte: per 2-bit field, the code
/// difference, with a difference of 3 counting 6.
const BIT_PAIRS_DIFF_TABLE: [[u8; 256]; 256] = {
    let diff: [[u8; 4]; 4] = [[0, 1, 2, 6], [1, 0, 1, 2], [2, 1, 0, 1], [6, 2, 1, 0]];
    let mut table = [[0u8; 256]; 256];
    let mut i = 0;
    while i < 256 {
        let mut j = 0;
        while j < 256 {
            table[i][j] = diff[i & 3][j & 3]
                + diff[(i >> 2) & 3][(j >> 2) & 3]
                + diff[(i >> 4) & 3][(j >> 4) & 3]
                + diff[i >> 6][j >> 6];
            j += 1;
        }
        i += 1;
    }
    table
};

/// Length capture thresholds: `lvalue` is the index of the first entry that
/// is >= the input length (log-bucketed length).
const TOPVAL: [u32; 170] = [
    1, 2, 3, 5, 7, 11, 17, 25, 38, 57, 86, 129, 194, 291, 437, 656, 854, 1110, 1443, 1876, 2439,
    3171, 3475, 3823, 4205, 4626, 5088, 5597, 6157, 6772, 7450, 8195, 9014, 9916, 10907, 11998,
    13198, 14518, 15970, 17567, 19323, 21256, 23382, 25720, 28292, 31121, 34233, 37656, 41422,
    45564, 50121, 55133, 60646, 66711, 73382, 80721, 88793, 97672, 107439, 118183, 130002, 143002,
    157302, 173032, 190335, 209369, 230306, 253337, 278670, 306538, 337191, 370911, 408002, 448802,
    493682, 543050, 597356, 657091, 722800, 795081, 874589, 962048, 1058252, 1164078, 1280486,
    1408534, 1549388, 1704327, 1874759, 2062236, 2268459, 2495305, 2744836, 3019320, 3321252,
    3653374, 4018711, 4420582, 4862641, 5348905, 5883796, 6472176, 7119394, 7831333, 8614467,
    9475909, 10423501, 11465851, 12612437, 13873681, 15261050, 16787154, 18465870, 20312458,
    22343706, 24578077, 27035886, 29739474, 32713425, 35984770, 39583245, 43541573, 47895730,
    52685306, 57953837, 63749221, 70124148, 77136564, 84850228, 93335252, 102668779, 112935659,
    124229227, 136652151, 150317384, 165349128, 181884040, 200072456, 220079703, 242087671,
    266296456, 292926096, 322218735, 354440623, 389884688, 428873168, 471760495, 518936559,
    570830240, 627913311, 690704607, 759775136, 835752671, 919327967, 1011260767, 1112386880,
    1223623232, 1345985727, 1480584256, 1628642751, 1791507135, 1970657856, 2167723648, 2384496256,
    2622945920, 2885240448, 3173764736, 3491141248, 3840255616, 4224281216,
];

/// Input that cannot produce a valid digest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum Unhashable {
    #[error("input too short for a digest: {0} bytes")]
    TooShort(usize),
    #[error("insufficient byte diversity")]
    LowDiversity,
}

/// A 35-byte TLSH digest: 1 checksum byte, 1 log-length byte, two 4-bit
/// quartile ratios, and 32 bytes packing 128 two-bit bucket codes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TlshDigest {
    pub checksum: u8,
    pub lvalue: u8,
    pub q1_ratio: u8,
    pub q2_ratio: u8,
    pub body: [u8; CODE_SIZE],
}

fn b_mapping(salt: u8, i: u8, j: u8, k: u8) -> u8 {
    let mut h = V_TABLE[usize::from(salt)];
    h = V_TABLE[usize::from(h ^ i)];
    h = V_TABLE[usize::from(h ^ j)];
    V_TABLE[usize::from(h ^ k)]
}

fn l_capturing(len: u32) -> u8 {
    let mut bottom: u16 = 0;
    let mut top: u16 = 170;
    let mut idx: u16 = 85;
    loop {
        if idx == 0 {
            return 0;
        }
        if len <= TOPVAL[usize::from(idx)] && len > TOPVAL[usize::from(idx) - 1] {
            return idx as u8;
        }
        if len < TOPVAL[usize::from(idx)] {
            top = idx - 1;
        } else {
            bottom = idx + 1;
        }
        idx = (bottom + top) / 2;
    }
}

fn swap_nibbles(b: u8) -> u8 {
    (b >> 4) | (b << 4)
}

fn mod_diff(x: u8, y: u8, range: u32) -> u32 {
    let (x, y) = (u32::from(x), u32::from(y));
    let dl = x.abs_diff(y);
    dl.min(range - dl)
}

/// Compute the digest of a normalized function body.
pub fn tlsh_digest(data: &[u8]) -> Result<TlshDigest, Unhashable> {
    if data.len() < MIN_INPUT_LEN {
        return Err(Unhashable::TooShort(data.len()));
    }

    let mut buckets = [0u32; 256];
    let mut checksum = 0u8;
    for w in data.windows(5) {
        // window bytes newest-first, as the reference processes them
        let (b0, b1, b2, b3, b4) = (w[4], w[3], w[2], w[1], w[0]);
        checksum = b_mapping(0, b0, b1, checksum);
        buckets[usize::from(b_mapping(2, b0, b1, b2))] += 1;
        buckets[usize::from(b_mapping(3, b0, b1, b3))] += 1;
        buckets[usize::from(b_mapping(5, b0, b2, b3))] += 1;
        buckets[usize::from(b_mapping(7, b0, b2, b4))] += 1;
        buckets[usize::from(b_mapping(11, b0, b1, b4))] += 1;
        buckets[usize::from(b_mapping(13, b0, b3, b4))] += 1;
    }

    let mut sorted: Vec<u32> = buckets[..BUCKETS].to_vec();
    sorted.sort_unstable();
    let q1 = sorted[BUCKETS / 4 - 1];
    let q2 = sorted[BUCKETS / 2 - 1];
    let q3 = sorted[BUCKETS - BUCKETS / 4 - 1];
    if q3 == 0 {
        return Err(Unhashable::LowDiversity);
    }
    let nonzero = buckets[..BUCKETS].iter().filter(|c| **c > 0).count();
    if nonzero <= BUCKETS / 2 {
        return Err(Unhashable::LowDiversity);
    }

    let mut body = [0u8; CODE_SIZE];
    for (i, chunk) in buckets[..BUCKETS].chunks(4).enumerate() {
        let mut packed = 0u8;
        for (j, count) in chunk.iter().enumerate() {
            let grade = if q3 < *count {
                3
            } else if q2 < *count {
                2
            } else if q1 < *count {
                1
            } else {
                0
            };
            packed |= grade << (j * 2);
        }
        body[i] = packed;
    }

    Ok(TlshDigest {
        checksum,
        lvalue: l_capturing(data.len() as u32),
        q1_ratio: (((q1 * 100) as f32 / q3 as f32) as u32 % 16) as u8,
        q2_ratio: (((q2 * 100) as f32 / q3 as f32) as u32 % 16) as u8,
        body,
    })
}

/// Distance between two digests (length difference included).
pub fn tlsh_distance(a: &TlshDigest, b: &TlshDigest) -> u32 {
    let mut diff;
    let ldiff = mod_diff(a.lvalue, b.lvalue, 256);
    diff = match ldiff {
        0 => 0,
        1 => 1,
        d => d * 12,
    };
    for (x, y) in [(a.q1_ratio, b.q1_ratio), (a.q2_ratio, b.q2_ratio)] {
        let qdiff = mod_diff(x, y, 16);
        diff += if qdiff <= 1 { qdiff } else { (qdiff - 1) * 12 };
    }
    if a.checksum != b.checksum {
        diff += 1;
    }
    for (x, y) in a.body.iter().zip(b.body.iter()) {
        diff += u32::from(BIT_PAIRS_DIFF_TABLE[usize::from(*x)][usize::from(*y)]);
    }
    diff
}

impl TlshDigest {
    /// Distance to another digest.
    pub fn distance(&self, other: &TlshDigest) -> u32 {
        tlsh_distance(self, other)
    }

    /// 2-bit code of one bucket.
    pub fn body_code(&self, bucket: usize) -> u8 {
        debug_assert!(bucket < BUCKETS);
        (self.body[bucket / 4] >> ((bucket % 4) * 2)) & 3
    }

    /// Overwrite the 2-bit code of one bucket.
    pub fn set_body_code(&mut self, bucket: usize, code: u8) {
        debug_assert!(bucket < BUCKETS && code < 4);
        let shift = (bucket % 4) * 2;
        let byte = &mut self.body[bucket / 4];
        *byte = (*byte & !(3 << shift)) | (code << shift);
    }

    /// Render as 70 lowercase hex characters, matching the published digest
    /// string layout (nibble-swapped header, code bytes reversed).
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(70);
        let mut push = |b: u8| out.push_str(&format!("{b:02x}"));
        push(swap_nibbles(self.checksum));
        push(swap_nibbles(self.lvalue));
        push((self.q1_ratio << 4) | self.q2_ratio);
        for b in self.body.iter().rev() {
            push(*b);
        }
        out
    }

    /// Parse the 70-hex-character textual form.
    pub fn from_hex(s: &str) -> Result<TlshDigest, ParseDigestError> {
        let s = s.trim();
        if s.len() != 70 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(ParseDigestError);
        }
        let byte = |i: usize| u8::from_str_radix(&s[2 * i..2 * i + 2], 16).unwrap();
        let qb = byte(2);
        let mut body = [0u8; CODE_SIZE];
        for (i, b) in body.iter_mut().enumerate() {
            *b = byte(2 + CODE_SIZE - i);
        }
        Ok(TlshDigest {
            checksum: swap_nibbles(byte(0)),
            lvalue: swap_nibbles(byte(1)),
            q1_ratio: qb >> 4,
            q2_ratio: qb & 0x0f,
            body,
        })
    }

    /// Pack into the 35-byte on-disk layout: checksum, lvalue, packed
    /// q-ratios, then the 32 code bytes in internal order.
    pub fn to_raw(&self) -> [u8; 35] {
        let mut raw = [0u8; 35];
        raw[0] = self.checksum;
        raw[1] = self.lvalue;
        raw[2] = (self.q1_ratio << 4) | self.q2_ratio;
        raw[3..].copy_from_slice(&self.body);
        raw
    }

    /// Unpack the 35-byte on-disk layout.
    pub fn from_raw(raw: &[u8; 35]) -> TlshDigest {
        let mut body = [0u8; CODE_SIZE];
        body.copy_from_slice(&raw[3..]);
        TlshDigest {
            checksum: raw[0],
            lvalue: raw[1],
            q1_ratio: raw[2] >> 4,
            q2_ratio: raw[2] & 0x0f,
            body,
        }
    }
}

impl fmt::Debug for TlshDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TlshDigest({})", self.to_hex())
    }
}

impl fmt::Display for TlshDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Malformed textual digest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("digest is not 70 hex characters")]
pub struct ParseDigestError;
