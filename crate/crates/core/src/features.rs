//! Referenceless feature planes rendered from one coding pass.
//!
//! * `rec`: the reconstructed luma frame itself.
//! * `seg`: each coding unit filled with the mean of its reconstructed pixels.
//! * `intra`: each 16x16 prediction block filled with `mode * 7`, spreading the
//!   35 intra modes evenly over `[0, 238]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side of the fixed prediction-unit grid used for the intra plane.
pub const PU_GRID: u32 = 16;
pub const MAX_INTRA_MODE: u8 = 34;
/// Spacing between consecutive intra modes on the `[0, 238]` value scale.
pub const INTRA_VALUE_STEP: u8 = 7;

/// 8-bit single-channel image, row major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("frame must be nonempty, got {width}x{height}")));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Shape(format!(
                "{}x{} frame needs {} pixels, got {}",
                width,
                height,
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| p as u64).sum::<u64>() as f64 / self.pixels.len() as f64
    }

    fn fill_rect(&mut self, x: u32, y: u32, w: u32, h: u32, value: u8) {
        for row in y..y + h {
            let start = (row * self.width + x) as usize;
            self.pixels[start..start + w as usize].fill(value);
        }
    }
}

/// A coding unit rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CuRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl fmt::Display for CuRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CU({}, {}, {}x{})", self.x, self.y, self.w, self.h)
    }
}

/// Intra prediction mode of the 16x16 block whose origin is `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PuMode {
    pub x: u32,
    pub y: u32,
    pub mode: u8,
}

/// Checks that `cus` partitions the `width x height` frame exactly.
pub fn validate_tiling(width: u32, height: u32, cus: &[CuRect]) -> Result<()> {
    let mut owner: Vec<Option<usize>> = vec![None; width as usize * height as usize];
    for (i, cu) in cus.iter().enumerate() {
        if cu.w == 0 || cu.h == 0 {
            return Err(Error::Tiling(format!("{cu} is empty")));
        }
        if cu.x.checked_add(cu.w).map_or(true, |r| r > width) || cu.y.checked_add(cu.h).map_or(true, |b| b > height) {
            return Err(Error::Tiling(format!("{cu} extends outside the {width}x{height} frame")));
        }
        for row in cu.y..cu.y + cu.h {
            for col in cu.x..cu.x + cu.w {
                let slot = &mut owner[(row * width + col) as usize];
                if let Some(prev) = *slot {
                    return Err(Error::Tiling(format!("{} overlaps {} at ({col}, {row})", cus[prev], cu)));
                }
                *slot = Some(i);
            }
        }
    }
    if let Some(idx) = owner.iter().position(Option::is_none) {
        let (x, y) = (idx as u32 % width, idx as u32 / width);
        return Err(Error::Tiling(format!("pixel ({x}, {y}) is not covered by any CU")));
    }
    Ok(())
}

/// Checks that `pus` assigns exactly one in-range mode to every 16x16 cell.
pub fn validate_pus(width: u32, height: u32, pus: &[PuMode]) -> Result<()> {
    intra_grid(width, height, pus).map(|_| ())
}

fn intra_grid(width: u32, height: u32, pus: &[PuMode]) -> Result<Vec<u8>> {
    let cols = width.div_ceil(PU_GRID);
    let rows = height.div_ceil(PU_GRID);
    let mut grid: Vec<Option<u8>> = vec![None; (cols * rows) as usize];
    for pu in pus {
        if pu.mode > MAX_INTRA_MODE {
            return Err(Error::Range(format!(
                "intra mode {} at ({}, {}) outside [0, {MAX_INTRA_MODE}]",
                pu.mode, pu.x, pu.y
            )));
        }
        if pu.x % PU_GRID != 0 || pu.y % PU_GRID != 0 {
            return Err(Error::Tiling(format!("PU origin ({}, {}) is not on the 16-pixel grid", pu.x, pu.y)));
        }
        if pu.x >= width || pu.y >= height {
            return Err(Error::Tiling(format!("PU origin ({}, {}) outside the frame", pu.x, pu.y)));
        }
        let cell = &mut grid[((pu.y / PU_GRID) * cols + pu.x / PU_GRID) as usize];
        if cell.is_some() {
            return Err(Error::Tiling(format!("PU at ({}, {}) given twice", pu.x, pu.y)));
        }
        *cell = Some(pu.mode);
    }
    grid.iter()
        .enumerate()
        .map(|(i, m)| {
            m.ok_or_else(|| {
                let i = i as u32;
                Error::Tiling(format!(
                    "16x16 cell at ({}, {}) has no intra mode",
                    (i % cols) * PU_GRID,
                    (i / cols) * PU_GRID
                ))
            })
        })
        .collect()
}

/// Reconstructed-frame plane (an identity copy).
pub fn build_rec(frame: &GrayFrame) -> GrayFrame {
    frame.clone()
}

/// Segmentation plane: each CU filled with the rounded mean of its pixels.
pub fn build_seg(frame: &GrayFrame, cus: &[CuRect]) -> Result<GrayFrame> {
    validate_tiling(frame.width, frame.height, cus)?;
    let mut out = frame.clone();
    for cu in cus {
        let mut sum = 0u64;
        for row in cu.y..cu.y + cu.h {
            let start = (row * frame.width + cu.x) as usize;
            sum += frame.pixels[start..start + cu.w as usize].iter().map(|&p| p as u64).sum::<u64>();
        }
        let count = cu.w as u64 * cu.h as u64;
        // round half up
        let mean = (2 * sum + count) / (2 * count);
        out.fill_rect(cu.x, cu.y, cu.w, cu.h, mean as u8);
    }
    Ok(out)
}

/// Intra-mode plane on the fixed 16x16 grid; edge blocks are truncated.
pub fn build_intra(width: u32, height: u32, pus: &[PuMode]) -> Result<GrayFrame> {
    let modes = intra_grid(width, height, pus)?;
    let cols = width.div_ceil(PU_GRID);
    let mut out = GrayFrame::filled(width, height, 0)?;
    for (i, &mode) in modes.iter().enumerate() {
        let (x, y) = ((i as u32 % cols) * PU_GRID, (i as u32 / cols) * PU_GRID);
        let w = PU_GRID.min(width - x);
        let h = PU_GRID.min(height - y);
        out.fill_rect(x, y, w, h, mode * INTRA_VALUE_STEP);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Rec,
    Seg,
    Intra,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Rec, Channel::Seg, Channel::Intra];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Rec => "rec",
            Channel::Seg => "seg",
            Channel::Intra => "intra",
        }
    }
}

/// Nonempty subset of feature channels, always iterated as (rec, seg, intra).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChannelSet(u8);

impl ChannelSet {
    pub const FULL: ChannelSet = ChannelSet(0b111);

    pub fn new(channels: &[Channel]) -> Result<Self> {
        let bits = channels.iter().fold(0u8, |acc, &c| acc | 1 << c as u8);
        if bits == 0 {
            return Err(Error::Config("at least one feature channel is required".into()));
        }
        Ok(ChannelSet(bits))
    }

    /// The seven nonempty subsets.
    pub fn all_subsets() -> Vec<ChannelSet> {
        (1..8).map(ChannelSet).collect()
    }

    pub fn contains(self, c: Channel) -> bool {
        self.0 & (1 << c as u8) != 0
    }

    pub fn channels(self) -> Vec<Channel> {
        Channel::ALL.into_iter().filter(|&c| self.contains(c)).collect()
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.channels().into_iter().map(Channel::name).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for ChannelSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let channels = s
            .split([',', '+'])
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| match t {
                "rec" => Ok(Channel::Rec),
                "seg" => Ok(Channel::Seg),
                "intra" => Ok(Channel::Intra),
                other => Err(Error::Config(format!("unknown feature channel '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        ChannelSet::new(&channels)
    }
}

impl TryFrom<String> for ChannelSet {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ChannelSet> for String {
    fn from(c: ChannelSet) -> String {
        c.to_string()
    }
}

/// Feature planes of one frame stacked in canonical channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    width: u32,
    height: u32,
    channels: ChannelSet,
    planes: Vec<GrayFrame>,
}

impl FeatureStack {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> ChannelSet {
        self.channels
    }

    pub fn planes(&self) -> &[GrayFrame] {
        &self.planes
    }

    pub fn plane(&self, c: Channel) -> Option<&GrayFrame> {
        self.channels
            .channels()
            .iter()
            .position(|&x| x == c)
            .map(|i| &self.planes[i])
    }
}

/// Concatenates planes into a stack ordered (rec, seg, intra).
pub fn assemble(planes: Vec<(Channel, GrayFrame)>) -> Result<FeatureStack> {
    let mut planes = planes;
    planes.sort_by_key(|(c, _)| *c);
    if planes.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Config("a feature channel was given twice".into()));
    }
    let channels = ChannelSet::new(&planes.iter().map(|(c, _)| *c).collect::<Vec<_>>())?;
    let (width, height) = (planes[0].1.width, planes[0].1.height);
    if let Some((c, p)) = planes.iter().find(|(_, p)| p.width != width || p.height != height) {
        return Err(Error::Shape(format!(
            "{} plane is {}x{}, expected {width}x{height}",
            c.name(),
            p.width,
            p.height
        )));
    }
    Ok(FeatureStack {
        width,
        height,
        channels,
        planes: planes.into_iter().map(|(_, p)| p).collect(),
    })
}

/// Renders the selected planes for a frame and its coding decisions.
pub fn extract(frame: &GrayFrame, cus: &[CuRect], pus: &[PuMode], channels: ChannelSet) -> Result<FeatureStack> {
    let planes = channels
        .channels()
        .into_iter()
        .map(|c| {
            let plane = match c {
                Channel::Rec => build_rec(frame),
                Channel::Seg => build_seg(frame, cus)?,
                Channel::Intra => build_intra(frame.width, frame.height, pus)?,
            };
            Ok((c, plane))
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(planes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadrants(size: u32) -> Vec<CuRect> {
        let h = size / 2;
        vec![
            CuRect { x: 0, y: 0, w: h, h },
            CuRect { x: h, y: 0, w: h, h },
            CuRect { x: 0, y: h, w: h, h },
            CuRect { x: h, y: h, w: h, h },
        ]
    }

    #[test]
    fn rec_is_identity() {
        let f = GrayFrame::new(1, 1, vec![42]).unwrap();
        assert_eq!(build_rec(&f).pixels(), &[42]);
        let checker: Vec<u8> = (0..16).map(|i| if (i + i / 4) % 2 == 0 { 0 } else { 255 }).collect();
        let f = GrayFrame::new(4, 4, checker.clone()).unwrap();
        assert_eq!(build_rec(&f).pixels(), checker.as_slice());
    }

    #[test]
    fn seg_examples() {
        let uniform = GrayFrame::filled(8, 8, 128).unwrap();
        assert!(build_seg(&uniform, &quadrants(8)).unwrap().pixels().iter().all(|&p| p == 128));

        let f = GrayFrame::new(2, 2, vec![0, 2, 4, 6]).unwrap();
        let one = [CuRect { x: 0, y: 0, w: 2, h: 2 }];
        assert_eq!(build_seg(&f, &one).unwrap().pixels(), &[3, 3, 3, 3]);

        #[rustfmt::skip]
        let f = GrayFrame::new(4, 4, vec![
            10, 20,   0, 1,
            30, 40,   1, 1,
            100, 101, 255, 255,
            102, 103, 254, 254,
        ]).unwrap();
        // quadrant means: 25, 0.75 -> 1, 101.5 -> 102, 254.5 -> 255
        #[rustfmt::skip]
        let expect = [
            25, 25, 1, 1,
            25, 25, 1, 1,
            102, 102, 255, 255,
            102, 102, 255, 255,
        ];
        let seg = build_seg(&f, &quadrants(4)).unwrap();
        assert_eq!(seg.pixels(), &expect);
        assert!((seg.mean() - f.mean()).abs() <= 0.5);
    }

    #[test]
    fn seg_rejects_bad_tilings() {
        let f = GrayFrame::filled(4, 4, 0).unwrap();
        let mut gap = quadrants(4);
        gap.pop();
        assert!(matches!(build_seg(&f, &gap), Err(Error::Tiling(_))));
        let mut overlap = quadrants(4);
        overlap.push(CuRect { x: 1, y: 1, w: 2, h: 2 });
        let err = build_seg(&f, &overlap).unwrap_err().to_string();
        assert!(err.contains("CU(0, 0, 2x2)") && err.contains("CU(1, 1, 2x2)"), "{err}");
        let outside = [CuRect { x: 0, y: 0, w: 5, h: 4 }];
        assert!(build_seg(&f, &outside).is_err());
    }

    #[test]
    fn intra_values() {
        let pus = |mode| vec![PuMode { x: 0, y: 0, mode }, PuMode { x: 16, y: 0, mode }];
        assert!(build_intra(32, 16, &pus(0)).unwrap().pixels().iter().all(|&p| p == 0));
        assert!(build_intra(32, 16, &pus(34)).unwrap().pixels().iter().all(|&p| p == 238));
        assert!(build_intra(32, 16, &pus(17)).unwrap().pixels().iter().all(|&p| p == 119));
        assert!(matches!(build_intra(32, 16, &pus(35)), Err(Error::Range(_))));
        assert!(build_intra(32, 16, &pus(1)[..1]).is_err());
    }

    #[test]
    fn intra_partial_edge_blocks() {
        let pus = [
            PuMode { x: 0, y: 0, mode: 1 },
            PuMode { x: 16, y: 0, mode: 2 },
            PuMode { x: 0, y: 16, mode: 3 },
            PuMode { x: 16, y: 16, mode: 4 },
        ];
        let p = build_intra(20, 18, &pus).unwrap();
        assert_eq!(p.get(15, 15), 7);
        assert_eq!(p.get(19, 0), 14);
        assert_eq!(p.get(0, 17), 21);
        assert_eq!(p.get(19, 17), 28);
        let misaligned = [PuMode { x: 8, y: 0, mode: 1 }];
        assert!(build_intra(16, 16, &misaligned).is_err());
    }

    #[test]
    fn assemble_orders_channels() {
        let a = GrayFrame::filled(4, 4, 1).unwrap();
        let b = GrayFrame::filled(4, 4, 2).unwrap();
        let c = GrayFrame::filled(4, 4, 3).unwrap();
        let rec = assemble(vec![(Channel::Rec, a.clone())]).unwrap();
        assert_eq!(rec.planes().len(), 1);
        let two = assemble(vec![(Channel::Intra, c.clone()), (Channel::Seg, b.clone())]).unwrap();
        assert_eq!(two.channels().channels(), vec![Channel::Seg, Channel::Intra]);
        assert_eq!(two.planes()[0], b);
        let all = assemble(vec![(Channel::Intra, c), (Channel::Rec, a), (Channel::Seg, b)]).unwrap();
        assert_eq!(all.channels(), ChannelSet::FULL);
        assert!(assemble(vec![]).is_err());
        let small = GrayFrame::filled(2, 2, 0).unwrap();
        let big = GrayFrame::filled(4, 4, 0).unwrap();
        assert!(matches!(
            assemble(vec![(Channel::Rec, big), (Channel::Seg, small)]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn channel_set_parsing() {
        assert_eq!("intra,rec".parse::<ChannelSet>().unwrap().to_string(), "rec,intra");
        assert_eq!(ChannelSet::all_subsets().len(), 7);
        assert!("".parse::<ChannelSet>().is_err());
        assert!("rec,foo".parse::<ChannelSet>().is_err());
    }
}
