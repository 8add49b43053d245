use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::DepthImage;
use crate::posefilter::FrameId;

/// Depth frames keyed by frame id.
#[derive(Clone, Debug, Default)]
pub struct DepthStore {
    frames: BTreeMap<FrameId, DepthImage>,
}

impl DepthStore {
    /// Frame ids are the positions in `frames`.
    pub fn from_frames(frames: Vec<DepthImage>) -> Self {
        Self { frames: frames.into_iter().enumerate().map(|(i, d)| (i as FrameId, d)).collect() }
    }

    pub fn insert(&mut self, frame: FrameId, depth: DepthImage) {
        self.frames.insert(frame, depth);
    }

    pub fn get(&self, frame: FrameId) -> Result<&DepthImage> {
        self.frames.get(&frame).ok_or(Error::MissingFrame(frame))
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn file_name(frame: FrameId) -> String {
        format!("frame_{frame}.dpt")
    }

    pub fn path(dir: &Path, frame: FrameId) -> PathBuf {
        dir.join(Self::file_name(frame))
    }

    /// Loads `frame_<id>.dpt` for every requested id; the first absent file is
    /// reported as [`Error::MissingFrame`].
    pub fn load_dir(dir: &Path, frames: impl IntoIterator<Item = FrameId>) -> Result<Self> {
        let mut store = Self::default();
        for frame in frames {
            let path = Self::path(dir, frame);
            if !path.is_file() {
                return Err(Error::MissingFrame(frame));
            }
            store.insert(frame, DepthImage::load(&path)?);
        }
        Ok(store)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        for (frame, depth) in &self.frames {
            depth.save(&Self::path(dir, *frame))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dir_roundtrip_and_missing_frame() {
        let dir = tempfile::tempdir().unwrap();
        let store = DepthStore::from_frames(vec![DepthImage::filled(3, 2, 1.5), DepthImage::filled(3, 2, 2.5)]);
        store.save_dir(dir.path()).unwrap();
        assert!(dir.path().join("frame_1.dpt").is_file());
        let loaded = DepthStore::load_dir(dir.path(), [0, 1]).unwrap();
        assert_eq!(loaded.get(1).unwrap(), store.get(1).unwrap());
        assert!(matches!(DepthStore::load_dir(dir.path(), [0, 4]), Err(Error::MissingFrame(4))));
        assert!(matches!(store.get(9), Err(Error::MissingFrame(9))));
    }
}
