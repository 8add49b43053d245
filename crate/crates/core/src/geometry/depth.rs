use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const DEPTH_MAGIC: &[u8; 4] = b"DPT1";

/// Row-major depth map in meters, top-left origin. Values `<= 0` or non-finite are invalid.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "depth data has {} values, expected {}×{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, depth: f32) -> Self {
        Self { width, height, data: vec![depth; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Valid depth at a row-major pixel index.
    #[inline]
    pub fn valid_at(&self, index: usize) -> Option<f32> {
        let d = self.data[index];
        (d > 0.0 && d.is_finite()).then_some(d)
    }

    pub fn get(&self, col: usize, row: usize) -> Option<f32> {
        if col >= self.width || row >= self.height {
            return None;
        }
        self.valid_at(row * self.width + col)
    }

    pub fn valid_count(&self) -> usize {
        (0..self.data.len()).filter(|&i| self.valid_at(i).is_some()).count()
    }

    /// Encodes as DPT1. Invalid pixels are written as 0.0.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(DEPTH_MAGIC)?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for i in 0..self.data.len() {
            let d = self.valid_at(i).unwrap_or(0.0);
            buf.extend_from_slice(&d.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; 12];
        r.read_exact(&mut header).map_err(|_| Error::Format("truncated DPT1 header".into()))?;
        if &header[..4] != DEPTH_MAGIC {
            return Err(Error::Format("missing DPT1 magic".into()));
        }
        let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let mut bytes = vec![0u8; width * height * 4];
        r.read_exact(&mut bytes).map_err(|_| Error::Format(format!("truncated DPT1 payload for {width}×{height}")))?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Self::new(width, height, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::read_from(BufReader::new(file))
    }
}
