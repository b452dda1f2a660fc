//! Reference scans and their cached rotations.
//!
//! A [`GroundTruthSet`] holds one entry per reference face. Rotated views
//! are built lazily, memoised in memory, and optionally persisted to a disk
//! cache keyed by the image content hash and the rotation.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imagecore::{rotate, rotated_pixel, to_gray, GrayImage, IntegralImage, RasterImage, RectRegion, RotationGeometry, WHITE};
use crate::io::{load_raster, save_raster};
use crate::rectfit::check_step;
use crate::scalar::Scalar;
use crate::surface::SearchSurface;

/// One reference face.
#[derive(Clone, Debug)]
pub struct GroundTruthEntry<T: Scalar = f64> {
    pub id: String,
    pub image: RasterImage,
    pub gray: GrayImage<T>,
    /// Hex SHA-256 of the dimensions and pixel bytes.
    pub hash: String,
}

impl<T: Scalar> GroundTruthEntry<T> {
    pub fn new(id: impl Into<String>, image: RasterImage) -> Self {
        let gray = to_gray(&image);
        let hash = content_hash(&image);
        Self {
            id: id.into(),
            image,
            gray,
            hash,
        }
    }
}

pub fn content_hash(img: &RasterImage) -> String {
    let mut h = Sha256::new();
    h.update((img.width() as u64).to_le_bytes());
    h.update((img.height() as u64).to_le_bytes());
    for p in img.pixels() {
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// A reference face rotated by a whole number of degrees, at full
/// resolution (`scale == 1`) or downsampled by `scale` for coarse search.
pub struct RotatedView<T: Scalar = f64> {
    pub id: String,
    pub degrees: u32,
    pub scale: usize,
    pub image: RasterImage,
    pub surface: SearchSurface<T>,
    geometry: RotationGeometry,
}

impl<T: Scalar> std::fmt::Debug for RotatedView<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RotatedView")
            .field("id", &self.id)
            .field("degrees", &self.degrees)
            .field("scale", &self.scale)
            .field("width", &self.width())
            .field("height", &self.height())
            .finish()
    }
}

impl<T: Scalar> RotatedView<T> {
    /// Builds the view of `base` (already downsampled by `scale`) rotated by `degrees`.
    pub fn build(id: impl Into<String>, base: &RasterImage, degrees: u32, scale: usize) -> Self {
        let rotated = rotate(base, degrees as i32, WHITE);
        Self::from_rotated(id, base.dimensions(), rotated, degrees, scale)
    }

    fn from_rotated(id: impl Into<String>, base_dims: (usize, usize), rotated: RasterImage, degrees: u32, scale: usize) -> Self {
        let geometry = RotationGeometry::new(base_dims.0, base_dims.1, f64::from(degrees));
        debug_assert_eq!(geometry.canvas(), rotated.dimensions());
        let surface = SearchSurface::new(to_gray(&rotated));
        Self {
            id: id.into(),
            degrees,
            scale,
            image: rotated,
            surface,
            geometry,
        }
    }

    pub fn width(&self) -> usize {
        self.surface.width()
    }

    pub fn height(&self) -> usize {
        self.surface.height()
    }

    pub fn gray(&self) -> &GrayImage<T> {
        self.surface.gray()
    }

    pub fn integral(&self) -> &IntegralImage<T> {
        self.surface.integral()
    }

    /// Maps a full-resolution unrotated point into this view's pixel grid.
    pub fn forward(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let s = self.scale as f64;
        let off = (s - 1.0) / 2.0;
        self.geometry.to_rotated(((x - off) / s, (y - off) / s))
    }

    /// Maps a point in this view's pixel grid to the full-resolution
    /// unrotated frame.
    pub fn inverse(&self, p: (f64, f64)) -> (f64, f64) {
        let s = self.scale as f64;
        let off = (s - 1.0) / 2.0;
        let (x, y) = self.geometry.to_source(p);
        (x * s + off, y * s + off)
    }

    pub fn geometry(&self) -> &RotationGeometry {
        &self.geometry
    }

}

type ViewKey = (usize, u32, usize);

struct ViewMemo<T: Scalar> {
    capacity: usize,
    order: VecDeque<ViewKey>,
    views: HashMap<ViewKey, Arc<RotatedView<T>>>,
}

impl<T: Scalar> ViewMemo<T> {
    fn get(&self, key: &ViewKey) -> Option<Arc<RotatedView<T>>> {
        self.views.get(key).cloned()
    }

    fn insert(&mut self, key: ViewKey, view: Arc<RotatedView<T>>) {
        if self.capacity == 0 || self.views.contains_key(&key) {
            return;
        }
        while self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.views.remove(&old);
            }
        }
        self.order.push_back(key);
        self.views.insert(key, view);
    }
}

/// Manifest written by `prepare`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub step: u32,
    pub search_images: usize,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub hash: String,
}

pub const DEFAULT_MEMO_CAPACITY: usize = 16;

/// The reference faces plus the rotation step of the search.
pub struct GroundTruthSet<T: Scalar = f64> {
    entries: Vec<GroundTruthEntry<T>>,
    step: u32,
    cache_dir: Option<PathBuf>,
    /// Downsampled copies of each entry, index `k` holding scale `2^(k+1)`.
    pyramids: Mutex<Vec<Vec<Arc<RasterImage>>>>,
    memo: Mutex<ViewMemo<T>>,
}

impl<T: Scalar> std::fmt::Debug for GroundTruthSet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroundTruthSet")
            .field("ids", &self.ids())
            .field("step", &self.step)
            .field("cache_dir", &self.cache_dir)
            .finish()
    }
}

/// Derives an entry id from a file name (its stem).
pub fn id_from_path(path: &Path) -> Option<String> {
    path.file_stem().and_then(|s| s.to_str()).map(str::to_string)
}

fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// Image files directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let read = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in read {
        let entry = entry.map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.is_file() && is_image_path(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

impl<T: Scalar> GroundTruthSet<T> {
    /// Builds a set from in-memory images.
    pub fn from_images(images: Vec<(String, RasterImage)>, step: u32) -> Result<Self> {
        check_step(step)?;
        if images.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        let mut entries: Vec<GroundTruthEntry<T>> = Vec::with_capacity(images.len());
        for (id, img) in images {
            if entries.iter().any(|e| e.id == id) {
                return Err(Error::DuplicateId {
                    path: PathBuf::from(&id),
                    id,
                });
            }
            entries.push(GroundTruthEntry::new(id, img));
        }
        let set = Self {
            pyramids: Mutex::new(vec![Vec::new(); entries.len()]),
            entries,
            step,
            cache_dir: None,
            memo: Mutex::new(ViewMemo {
                capacity: DEFAULT_MEMO_CAPACITY,
                order: VecDeque::new(),
                views: HashMap::new(),
            }),
        };
        assert_eq!(set.search_image_count(), set.entries.len() * (360 / step as usize));
        Ok(set)
    }

    /// Loads one entry per path; ids are the file stems.
    pub fn load(paths: &[PathBuf], step: u32) -> Result<Self> {
        check_step(step)?;
        if paths.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        let mut images: Vec<(String, RasterImage)> = Vec::with_capacity(paths.len());
        for path in paths {
            let id = id_from_path(path).ok_or_else(|| Error::Io {
                path: path.clone(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "no usable file stem"),
            })?;
            if images.iter().any(|(existing, _)| *existing == id) {
                return Err(Error::DuplicateId { id, path: path.clone() });
            }
            images.push((id, load_raster(path)?));
        }
        Self::from_images(images, step)
    }

    /// Loads every PNG/JPEG file in `dir`.
    pub fn load_dir(dir: &Path, step: u32) -> Result<Self> {
        Self::load(&list_images(dir)?, step)
    }

    /// Persists rotated views under `dir` (created if missing).
    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        self.cache_dir = Some(dir);
        Ok(self)
    }

    /// Number of views kept in memory (0 disables the memo).
    pub fn with_memo_capacity(self, capacity: usize) -> Self {
        {
            let mut memo = self.memo.lock().expect("memo lock");
            memo.capacity = capacity;
            memo.order.clear();
            memo.views.clear();
        }
        self
    }

    pub fn entries(&self) -> &[GroundTruthEntry<T>] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn entry(&self, id: &str) -> Result<&GroundTruthEntry<T>> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    /// Every rotation searched, in ascending order.
    pub fn rotations(&self) -> impl Iterator<Item = u32> + '_ {
        (0..360).step_by(self.step as usize)
    }

    /// `entries x (360 / step)`.
    pub fn search_image_count(&self) -> usize {
        self.entries.len() * (360 / self.step as usize)
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            step: self.step,
            search_images: self.search_image_count(),
            entries: self
                .entries
                .iter()
                .map(|e| ManifestEntry {
                    id: e.id.clone(),
                    width: e.image.width(),
                    height: e.image.height(),
                    hash: e.hash.clone(),
                })
                .collect(),
        }
    }

    /// Full-resolution view of `id` rotated by `degrees`.
    pub fn rotated_view(&self, id: &str, degrees: u32) -> Result<Arc<RotatedView<T>>> {
        self.rotated_view_at(id, degrees, 0)
    }

    /// View at pyramid `level` (0 = full resolution, each level halves).
    pub fn rotated_view_at(&self, id: &str, degrees: u32, level: usize) -> Result<Arc<RotatedView<T>>> {
        let index = self
            .entries
            .iter()
            .position(|e| e.id == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))?;
        self.view_by_index(index, degrees, level)
    }

    pub(crate) fn view_by_index(&self, index: usize, degrees: u32, level: usize) -> Result<Arc<RotatedView<T>>> {
        if degrees >= 360 || degrees % self.step != 0 {
            return Err(Error::MisalignedRotation {
                degrees,
                step: self.step,
            });
        }
        let key = (index, degrees, level);
        if let Some(v) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(v);
        }
        let view = Arc::new(self.compute_view(index, degrees, level)?);
        self.memo.lock().expect("memo lock").insert(key, Arc::clone(&view));
        Ok(view)
    }

    /// Builds a view without consulting or filling the in-memory memo (the
    /// disk cache is still used).
    pub(crate) fn fresh_view<U: Scalar>(&self, index: usize, degrees: u32, level: usize) -> Result<RotatedView<U>> {
        if degrees >= 360 || degrees % self.step != 0 {
            return Err(Error::MisalignedRotation {
                degrees,
                step: self.step,
            });
        }
        self.compute_view(index, degrees, level)
    }

    fn base_image(&self, index: usize, level: usize) -> Arc<RasterImage> {
        if level == 0 {
            return Arc::new(self.entries[index].image.clone());
        }
        let mut pyramids = self.pyramids.lock().expect("pyramid lock");
        let levels = &mut pyramids[index];
        while levels.len() < level {
            let next = levels.last().map_or_else(|| self.entries[index].image.downsample2(), |img| img.downsample2());
            levels.push(Arc::new(next));
        }
        Arc::clone(&levels[level - 1])
    }

    fn cache_path(&self, index: usize, degrees: u32, level: usize) -> Option<PathBuf> {
        self.cache_dir
            .as_ref()
            .map(|d| d.join(format!("{}_l{}_{:03}.png", self.entries[index].hash, level, degrees)))
    }

    fn compute_view<U: Scalar>(&self, index: usize, degrees: u32, level: usize) -> Result<RotatedView<U>> {
        let id = &self.entries[index].id;
        let scale = 1usize << level;
        let base = if level == 0 { None } else { Some(self.base_image(index, level)) };
        let base_ref = base.as_deref().unwrap_or(&self.entries[index].image);
        let Some(path) = self.cache_path(index, degrees, level) else {
            return Ok(RotatedView::build(id.clone(), base_ref, degrees, scale));
        };
        let expected = RotationGeometry::new(base_ref.width(), base_ref.height(), f64::from(degrees)).canvas();
        if path.is_file() {
            if let Ok(img) = load_raster(&path) {
                if img.dimensions() == expected {
                    return Ok(RotatedView::from_rotated(id.clone(), base_ref.dimensions(), img, degrees, scale));
                }
            }
        }
        let rotated = rotate(base_ref, degrees as i32, WHITE);
        write_atomically(&path, &rotated)?;
        Ok(RotatedView::from_rotated(id.clone(), base_ref.dimensions(), rotated, degrees, scale))
    }

    /// Luminance of `region` of the full-resolution view `(index, degrees)`,
    /// rendered without building the whole view. Pixels equal the
    /// corresponding pixels of [`rotated_view`](Self::rotated_view).
    pub(crate) fn render_window(&self, index: usize, degrees: u32, region: RectRegion) -> Result<GrayImage<T>> {
        let img = &self.entries[index].image;
        let geom = RotationGeometry::new(img.width(), img.height(), f64::from(degrees));
        let (cw, ch) = geom.canvas();
        region.check_within(cw, ch)?;
        let rgb = RasterImage::from_fn(region.w, region.h, |x, y| {
            rotated_pixel(img, &geom, region.x + x, region.y + y, WHITE)
        })?;
        Ok(to_gray(&rgb))
    }

    /// Canvas size of the full-resolution view of entry `index` at `degrees`.
    pub(crate) fn canvas_dims(&self, index: usize, degrees: u32) -> (usize, usize) {
        let img = &self.entries[index].image;
        RotationGeometry::new(img.width(), img.height(), f64::from(degrees)).canvas()
    }

    /// Computes (and persists, with a cache directory) every view up to `levels` pyramid levels.
    pub fn warm(&self, levels: usize) -> Result<()> {
        for index in 0..self.entries.len() {
            for level in 0..levels.max(1) {
                for deg in self.rotations() {
                    self.compute_view::<T>(index, deg, level)?;
                }
            }
        }
        Ok(())
    }
}

fn write_atomically(path: &Path, img: &RasterImage) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = tempfile::Builder::new()
        .prefix(".view-")
        .suffix(".png")
        .tempfile_in(dir)
        .map_err(io_err)?;
    save_raster(tmp.path(), img)?;
    tmp.as_file().flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
