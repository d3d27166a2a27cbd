use std::collections::HashSet;

use super::{to_usize, Reader};
use crate::attrnet::FeatureRecord;
use crate::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"DAEF";
const VERSION: u32 = 1;
const CONTEXT: &str = "feature file";

/// Contents of a feature file; values are widened from the stored `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub dim: usize,
    pub records: Vec<FeatureRecord>,
}

/// Layout: magic, u32 version, u32 dim, u64 count, then per record a u64
/// image id and `dim` f32 values. All little-endian.
pub fn write_features(records: &[FeatureRecord], dim: usize) -> Result<Vec<u8>> {
    let dim32 =
        u32::try_from(dim).map_err(|_| Error::Param(format!("feature dim {dim} too large")))?;
    let mut out = Vec::with_capacity(20 + records.len() * (8 + 4 * dim));
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim32.to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for (i, r) in records.iter().enumerate() {
        if r.feature.len() != dim {
            return Err(Error::dims(
                "feature record",
                &[i, r.feature.len()],
                &[i, dim],
            ));
        }
        out.extend_from_slice(&r.image_id.to_le_bytes());
        for &v in &r.feature {
            let narrow = v as f32;
            if !narrow.is_finite() {
                return Err(Error::NonFinite(format!(
                    "feature of image {} as f32",
                    r.image_id
                )));
            }
            out.extend_from_slice(&narrow.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_features(bytes: &[u8]) -> Result<FeatureFile> {
    let mut r = Reader::new(bytes, CONTEXT);
    if r.take(4)? != FEATURE_MAGIC {
        return Err(Error::parse(CONTEXT, "bad magic, expected DAEF"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::parse(
            CONTEXT,
            format!("unsupported version {version}"),
        ));
    }
    let dim = r.u32()? as usize;
    let count = to_usize(r.u64()?, CONTEXT)?;
    let record_len = 8 + 4 * dim;
    match count.checked_mul(record_len) {
        Some(n) if n == r.remaining() => {}
        _ => {
            return Err(Error::parse(
                CONTEXT,
                format!(
                    "{count} records of dim {dim} do not match {} payload bytes",
                    r.remaining()
                ),
            ))
        }
    }
    let mut seen = HashSet::with_capacity(count);
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let image_id = r.u64()?;
        if !seen.insert(image_id) {
            return Err(Error::parse_at(
                CONTEXT,
                i,
                format!("duplicate image id {image_id}"),
            ));
        }
        let mut feature = Vec::with_capacity(dim);
        for _ in 0..dim {
            let v = r.f32()?;
            if !v.is_finite() {
                return Err(Error::parse_at(CONTEXT, i, "non-finite value"));
            }
            feature.push(f64::from(v));
        }
        records.push(FeatureRecord { image_id, feature });
    }
    r.finish()?;
    Ok(FeatureFile { dim, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_pinned() {
        let bytes = write_features(
            &[FeatureRecord {
                image_id: 5,
                feature: vec![1.5, -2.0],
            }],
            2,
        )
        .unwrap();
        let mut want = b"DAEF".to_vec();
        want.extend([1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
        want.extend(5u64.to_le_bytes());
        want.extend(1.5f32.to_le_bytes());
        want.extend((-2.0f32).to_le_bytes());
        assert_eq!(bytes, want);
    }

    #[test]
    fn rejects_malformed_files() {
        let good = write_features(
            &[FeatureRecord {
                image_id: 1,
                feature: vec![0.5; 3],
            }],
            3,
        )
        .unwrap();
        assert!(read_features(&good[..good.len() - 1]).is_err());
        let mut extra = good.clone();
        extra.push(0);
        assert!(read_features(&extra).is_err());
        let mut magic = good.clone();
        magic[0] = b'X';
        assert!(read_features(&magic).is_err());
        let mut version = good.clone();
        version[4] = 2;
        assert!(read_features(&version).is_err());
        let mut nan = good.clone();
        let n = nan.len();
        nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(read_features(&nan).is_err());
        let mut huge = good;
        huge[12..20].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(read_features(&huge).is_err());

        let dup = write_features(
            &[
                FeatureRecord {
                    image_id: 1,
                    feature: vec![0.0],
                },
                FeatureRecord {
                    image_id: 1,
                    feature: vec![0.0],
                },
            ],
            1,
        )
        .unwrap();
        assert!(read_features(&dup).is_err());
        assert!(write_features(
            &[FeatureRecord {
                image_id: 1,
                feature: vec![0.0]
            }],
            2
        )
        .is_err());
        assert!(write_features(
            &[FeatureRecord {
                image_id: 1,
                feature: vec![1e300]
            }],
            1
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn round_trip_of_f32_values(
            rows in proptest::collection::btree_map(any::<u64>(), proptest::collection::vec(-1e6f32..1e6, 4), 0..6)
        ) {
            let records: Vec<FeatureRecord> = rows
                .iter()
                .map(|(id, v)| FeatureRecord { image_id: *id, feature: v.iter().map(|&x| f64::from(x)).collect() })
                .collect();
            let file = read_features(&write_features(&records, 4).unwrap()).unwrap();
            prop_assert_eq!(file.dim, 4);
            prop_assert_eq!(file.records, records);
        }
    }
}
