//! GeoTIFF and `.npy`-stack input/output.
//!
//! GeoTIFF georeferencing is taken from `ModelPixelScale` + `ModelTiepoint` (or an axis-aligned
//! `ModelTransformation`); nodata from the GDAL nodata tag; the CRS id from the GeoKey
//! directory (`EPSG:<code>`) or, failing that, the citation string.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::colortype::{self, ColorType};
use tiff::encoder::TiffEncoder;
use tiff::tags::{PhotometricInterpretation, SampleFormat, Tag};

use super::npy::{read_npy, write_npy_f64};
use super::{Band, ClassMap, GridGeometry, Plane, Raster, ScalarField, WaterMask};
use crate::error::{Error, Result};

const GT_MODEL_TYPE: u16 = 1024;
const GT_RASTER_TYPE: u16 = 1025;
const GT_CITATION: u16 = 1026;
const GEOGRAPHIC_TYPE: u16 = 2048;
const PROJECTED_CS_TYPE: u16 = 3072;
const RASTER_PIXEL_IS_POINT: u16 = 2;
const GDAL_METADATA: u16 = 42112;

/// Value written for invalid pixels of float fields.
pub const FIELD_NODATA: f32 = -9999.0;
pub const MASK_NODATA: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    GeoTiff,
    /// One `<band>.npy` per band next to a `geometry.json` sidecar.
    NpyStack,
}

impl RasterFormat {
    /// `.tif`/`.tiff` files are GeoTIFF; directories and `.json` sidecars are npy stacks.
    pub fn infer(path: &Path) -> RasterFormat {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "tif" || ext == "tiff" => RasterFormat::GeoTiff,
            _ if path.is_dir() => RasterFormat::NpyStack,
            Some(ext) if ext == "json" => RasterFormat::NpyStack,
            _ => RasterFormat::GeoTiff,
        }
    }
}

/// Sidecar describing an npy stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackGeometry {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size: f64,
    pub crs_id: String,
    pub band_names: Vec<String>,
    #[serde(default)]
    pub nodata: Option<f64>,
}

pub fn load_raster(path: &Path, format: RasterFormat) -> Result<Raster> {
    match format {
        RasterFormat::GeoTiff => read_geotiff(path),
        RasterFormat::NpyStack => read_npy_stack(path),
    }
}

fn invalid(path: &Path, reason: impl Into<String>) -> Error {
    Error::InvalidRaster {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Builds per-pixel validity: a pixel is nodata when every band equals `nodata`, or any band is
/// not finite. Invalid pixels are filled with 0 in every band.
fn split_validity(bands: &mut [Band], nodata: Option<f64>) -> Plane<bool> {
    let (w, h) = (bands[0].values.width(), bands[0].values.height());
    let mut validity = Plane::filled(w, h, true);
    for i in 0..w * h {
        let mut all_nodata = true;
        let mut non_finite = false;
        for band in bands.iter() {
            let v = band.values.as_slice()[i];
            non_finite |= !v.is_finite();
            let is_nd = match nodata {
                Some(nd) if nd.is_nan() => v.is_nan(),
                Some(nd) => v == nd,
                None => false,
            };
            all_nodata &= is_nd;
        }
        if all_nodata || non_finite {
            validity.as_mut_slice()[i] = false;
        }
    }
    for band in bands.iter_mut() {
        for (v, &ok) in band.values.as_mut_slice().iter_mut().zip(validity.as_slice()) {
            if !ok {
                *v = 0.0;
            }
        }
    }
    validity
}

fn default_band_names(n: usize) -> Vec<String> {
    const FOUR: [&str; 4] = ["blue", "green", "red", "nir"];
    const EIGHT: [&str; 8] = [
        "coastal_blue",
        "blue",
        "green_i",
        "green",
        "yellow",
        "red",
        "red_edge",
        "nir",
    ];
    match n {
        4 => FOUR.iter().map(|s| s.to_string()).collect(),
        8 => EIGHT.iter().map(|s| s.to_string()).collect(),
        _ => (1..=n).map(|i| format!("band{i}")).collect(),
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn xml_unescape(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&amp;", "&")
}

/// GDAL metadata XML carrying one `DESCRIPTION` item per band.
fn gdal_metadata(names: &[&str]) -> String {
    let mut xml = String::from("<GDALMetadata>");
    for (i, name) in names.iter().enumerate() {
        xml.push_str(&format!(
            "<Item name=\"DESCRIPTION\" sample=\"{i}\" role=\"description\">{}</Item>",
            xml_escape(name)
        ));
    }
    xml.push_str("</GDALMetadata>");
    xml
}

/// Band names from GDAL metadata, if every band has a distinct, non-empty description.
fn band_descriptions(xml: &str, samples: usize) -> Option<Vec<String>> {
    let mut names = vec![String::new(); samples];
    let mut rest = xml;
    while let Some(start) = rest.find("<Item ") {
        rest = &rest[start..];
        let open_end = rest.find('>')?;
        let attrs = &rest[..open_end];
        let close = rest.find("</Item>")?;
        let text = &rest[open_end + 1..close];
        rest = &rest[close..];
        let attr = |key: &str| {
            let pat = format!("{key}=\"");
            let i = attrs.find(&pat)? + pat.len();
            let j = attrs[i..].find('"')? + i;
            Some(&attrs[i..j])
        };
        if attr("role") != Some("description") {
            continue;
        }
        if let Some(k) = attr("sample").and_then(|v| v.parse::<usize>().ok()) {
            if k < samples {
                names[k] = xml_unescape(text.trim());
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    names
        .iter()
        .all(|n| !n.is_empty() && seen.insert(n.as_str()))
        .then_some(names)
}

fn to_f64(result: DecodingResult) -> Vec<f64> {
    match result {
        DecodingResult::U8(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::U16(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::U32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::U64(v) => v.into_iter().map(|x| x as f64).collect(),
        DecodingResult::F16(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::F32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::F64(v) => v,
        DecodingResult::I8(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::I16(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::I32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::I64(v) => v.into_iter().map(|x| x as f64).collect(),
    }
}

struct GeoKeys {
    pixel_is_point: bool,
    crs_id: String,
}

fn read_geokeys<R: std::io::Read + std::io::Seek>(dec: &mut Decoder<R>) -> tiff::TiffResult<GeoKeys> {
    let mut keys = GeoKeys {
        pixel_is_point: false,
        crs_id: "unknown".to_string(),
    };
    let Some(dir) = dec.find_tag(Tag::GeoKeyDirectoryTag)? else {
        return Ok(keys);
    };
    let dir = dir.into_u16_vec()?;
    let ascii = match dec.find_tag(Tag::GeoAsciiParamsTag)? {
        Some(v) => v.into_string().unwrap_or_default(),
        None => String::new(),
    };
    let mut citation = None;
    let mut epsg = None;
    for entry in dir.chunks_exact(4).skip(1) {
        let (key, location, count, value) = (entry[0], entry[1], entry[2] as usize, entry[3]);
        match key {
            GT_RASTER_TYPE if location == 0 => keys.pixel_is_point = value == RASTER_PIXEL_IS_POINT,
            PROJECTED_CS_TYPE | GEOGRAPHIC_TYPE if location == 0 && value != 0 && value != 32767 => {
                if key == PROJECTED_CS_TYPE || epsg.is_none() {
                    epsg = Some(value);
                }
            }
            GT_CITATION if location == Tag::GeoAsciiParamsTag.to_u16() => {
                let start = value as usize;
                let end = (start + count).min(ascii.len());
                if start < end {
                    let text = ascii[start..end].trim_end_matches(['|', '\0']).to_string();
                    if !text.is_empty() {
                        citation = Some(text);
                    }
                }
            }
            _ => {}
        }
    }
    if let Some(code) = epsg {
        keys.crs_id = format!("EPSG:{code}");
    } else if let Some(text) = citation {
        keys.crs_id = text;
    }
    Ok(keys)
}

fn read_geotiff(path: &Path) -> Result<Raster> {
    let tiff_err = |source| Error::Tiff {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = Decoder::new(BufReader::new(file))
        .map_err(tiff_err)?
        .with_limits(Limits::unlimited());
    let (width, height) = dec.dimensions().map_err(tiff_err)?;
    let (width, height) = (width as usize, height as usize);
    let samples = dec.colortype().map_err(tiff_err)?.num_samples() as usize;
    let planar = matches!(
        dec.find_tag_unsigned::<u16>(Tag::PlanarConfiguration)
            .map_err(tiff_err)?,
        Some(2)
    );

    let scale = dec
        .find_tag(Tag::ModelPixelScaleTag)
        .map_err(tiff_err)?
        .map(|v| v.into_f64_vec())
        .transpose()
        .map_err(tiff_err)?;
    let tiepoint = dec
        .find_tag(Tag::ModelTiepointTag)
        .map_err(tiff_err)?
        .map(|v| v.into_f64_vec())
        .transpose()
        .map_err(tiff_err)?;
    let transform = dec
        .find_tag(Tag::ModelTransformationTag)
        .map_err(tiff_err)?
        .map(|v| v.into_f64_vec())
        .transpose()
        .map_err(tiff_err)?;
    let keys = read_geokeys(&mut dec).map_err(tiff_err)?;
    let nodata = match dec.find_tag(Tag::GdalNodata).map_err(tiff_err)? {
        Some(v) => {
            let text = v.into_string().map_err(tiff_err)?;
            let text = text.trim_matches(|c: char| c.is_whitespace() || c == '\0');
            Some(
                text.parse::<f64>()
                    .map_err(|_| invalid(path, format!("unparseable nodata value {text:?}")))?,
            )
        }
        None => None,
    };

    let (pixel_size, mut origin_x, mut origin_y) = match (scale, tiepoint, transform) {
        (Some(scale), Some(tie), _) if scale.len() >= 2 && tie.len() >= 6 => {
            let (sx, sy) = (scale[0], scale[1]);
            if (sx - sy).abs() > 1e-9 * sx.abs().max(sy.abs()) {
                return Err(Error::NonSquarePixels { x: sx, y: sy });
            }
            (sx, tie[3] - tie[0] * sx, tie[4] + tie[1] * sy)
        }
        (_, _, Some(m)) if m.len() >= 16 => {
            let (a, b, d, e, f, h) = (m[0], m[1], m[3], m[4], m[5], m[7]);
            if b != 0.0 || e != 0.0 {
                return Err(invalid(path, "rotated geotransforms are not supported"));
            }
            if (a + f).abs() > 1e-9 * a.abs().max(f.abs()) {
                return Err(Error::NonSquarePixels { x: a, y: -f });
            }
            (a, d, h)
        }
        _ => {
            return Err(invalid(
                path,
                "missing geometry: no ModelPixelScale/ModelTiepoint or ModelTransformation tags",
            ))
        }
    };
    if keys.pixel_is_point {
        origin_x -= pixel_size / 2.0;
        origin_y += pixel_size / 2.0;
    }
    let geometry = GridGeometry::new(origin_x, origin_y, pixel_size, width, height, keys.crs_id)
        .map_err(|e| invalid(path, e.to_string()))?;

    let mut buffer = DecodingResult::U8(Vec::new());
    dec.read_image_to_buffer(&mut buffer).map_err(tiff_err)?;
    let data = to_f64(buffer);
    let n = width * height;
    if data.len() < n * samples {
        return Err(invalid(
            path,
            format!("decoded {} samples, expected {}", data.len(), n * samples),
        ));
    }
    let described = match dec.find_tag(Tag::Unknown(GDAL_METADATA)).map_err(tiff_err)? {
        Some(v) => band_descriptions(&v.into_string().map_err(tiff_err)?, samples),
        None => None,
    };
    let names = described.unwrap_or_else(|| default_band_names(samples));
    let mut bands = Vec::with_capacity(samples);
    for (s, name) in names.into_iter().enumerate() {
        let values: Vec<f64> = if planar {
            data[s * n..(s + 1) * n].to_vec()
        } else {
            data.iter().skip(s).step_by(samples).take(n).copied().collect()
        };
        bands.push(Band {
            name,
            values: Plane::from_vec(width, height, values)?,
        });
    }
    let validity = split_validity(&mut bands, nodata);
    Raster::new(geometry, bands, validity)
}

fn stack_paths(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.to_path_buf(), path.join("geometry.json"))
    } else {
        (
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
            path.to_path_buf(),
        )
    }
}

fn read_npy_stack(path: &Path) -> Result<Raster> {
    let (dir, sidecar) = stack_paths(path);
    if !sidecar.exists() {
        return Err(invalid(path, "missing geometry: no geometry.json sidecar"));
    }
    let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let meta: StackGeometry = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: sidecar.clone(),
        source,
    })?;
    if meta.band_names.is_empty() {
        return Err(invalid(&sidecar, "band_names is empty"));
    }
    let mut bands = Vec::with_capacity(meta.band_names.len());
    for name in &meta.band_names {
        let values = read_npy(&dir.join(format!("{name}.npy")))?;
        if let Some(first) = bands.first() {
            let first: &Band = first;
            if first.values.width() != values.width() || first.values.height() != values.height() {
                return Err(invalid(
                    path,
                    format!("band {name:?} shape differs from band {:?}", first.name),
                ));
            }
        }
        bands.push(Band {
            name: name.clone(),
            values,
        });
    }
    let geometry = GridGeometry::new(
        meta.origin_x,
        meta.origin_y,
        meta.pixel_size,
        bands[0].values.width(),
        bands[0].values.height(),
        meta.crs_id.clone(),
    )
    .map_err(|e| invalid(&sidecar, e.to_string()))?;
    let validity = split_validity(&mut bands, meta.nodata);
    Raster::new(geometry, bands, validity)
}

/// Writes an npy stack. Invalid pixels are written as `nodata` (0 when `None`).
pub fn write_npy_stack(dir: &Path, r: &Raster, nodata: Option<f64>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fill = nodata.unwrap_or(0.0);
    for band in r.bands() {
        let mut values = band.values.clone();
        for (v, &ok) in values.as_mut_slice().iter_mut().zip(r.validity().as_slice()) {
            if !ok {
                *v = fill;
            }
        }
        write_npy_f64(&dir.join(format!("{}.npy", band.name)), &values)?;
    }
    let g = r.geometry();
    let meta = StackGeometry {
        origin_x: g.origin_x,
        origin_y: g.origin_y,
        pixel_size: g.pixel_size,
        crs_id: g.crs_id.clone(),
        band_names: r.band_names().iter().map(|s| s.to_string()).collect(),
        nodata,
    };
    let sidecar = dir.join("geometry.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|source| Error::Json {
        path: sidecar.clone(),
        source,
    })?;
    std::fs::write(&sidecar, text + "\n").map_err(|e| Error::io(&sidecar, e))
}

fn geokey_directory(crs_id: &str) -> (Vec<u16>, Option<String>) {
    let mut keys: Vec<[u16; 4]> = vec![[GT_MODEL_TYPE, 0, 1, 1], [GT_RASTER_TYPE, 0, 1, 1]];
    let mut ascii = None;
    match crs_id.strip_prefix("EPSG:").and_then(|c| c.parse::<u16>().ok()) {
        Some(code) => keys.push([PROJECTED_CS_TYPE, 0, 1, code]),
        None => {
            let text = format!("{crs_id}|");
            keys.push([GT_CITATION, Tag::GeoAsciiParamsTag.to_u16(), text.len() as u16, 0]);
            ascii = Some(text);
        }
    }
    let mut dir = vec![1, 1, 0, keys.len() as u16];
    dir.extend(keys.iter().flatten());
    (dir, ascii)
}

/// Multi-sample chunky color types for writing; `N` samples of `T`.
macro_rules! multiband_colortype {
    ($name:ident, $inner:ty, $bits:expr, $fmt:expr) => {
        pub struct $name<const N: usize>;
        impl<const N: usize> ColorType for $name<N> {
            type Inner = $inner;
            const TIFF_VALUE: PhotometricInterpretation = PhotometricInterpretation::BlackIsZero;
            const BITS_PER_SAMPLE: &'static [u16] = &[$bits; N];
            const SAMPLE_FORMAT: &'static [SampleFormat] = &[$fmt; N];

            fn horizontal_predict(_: &[Self::Inner], _: &mut Vec<Self::Inner>) {
                unreachable!("predictor is never enabled")
            }
        }
    };
}

multiband_colortype!(MultiF32, f32, 32, SampleFormat::IEEEFP);
multiband_colortype!(MultiU16, u16, 16, SampleFormat::Uint);

fn write_geotiff<C: ColorType>(
    path: &Path,
    g: &GridGeometry,
    data: &[C::Inner],
    nodata: Option<&str>,
    band_names: Option<&[&str]>,
) -> Result<()>
where
    [C::Inner]: tiff::encoder::TiffValue,
{
    let tiff_err = |source| Error::Tiff {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(tiff_err)?;
    let mut image = enc
        .new_image::<C>(g.width_px as u32, g.height_px as u32)
        .map_err(tiff_err)?;
    let (dir, ascii) = geokey_directory(&g.crs_id);
    {
        let e = image.encoder();
        e.write_tag(Tag::ModelPixelScaleTag, &[g.pixel_size, g.pixel_size, 0.0][..])
            .map_err(tiff_err)?;
        e.write_tag(Tag::ModelTiepointTag, &[0.0, 0.0, 0.0, g.origin_x, g.origin_y, 0.0][..])
            .map_err(tiff_err)?;
        e.write_tag(Tag::GeoKeyDirectoryTag, &dir[..]).map_err(tiff_err)?;
        if let Some(text) = &ascii {
            e.write_tag(Tag::GeoAsciiParamsTag, text.as_str()).map_err(tiff_err)?;
        }
        if let Some(nd) = nodata {
            e.write_tag(Tag::GdalNodata, nd).map_err(tiff_err)?;
        }
        if let Some(names) = band_names {
            e.write_tag(Tag::Unknown(GDAL_METADATA), gdal_metadata(names).as_str())
                .map_err(tiff_err)?;
        }
    }
    image.write_data(data).map_err(tiff_err)
}

/// Single-band uint8 mask: 0 land, 1 water, 255 nodata.
pub fn write_mask_geotiff(path: &Path, m: &WaterMask) -> Result<()> {
    let codes = m.to_codes();
    write_geotiff::<colortype::Gray8>(path, m.geometry(), codes.as_slice(), Some("255"), None)
}

/// Single-band float32 field; invalid pixels are written as [`FIELD_NODATA`].
pub fn write_field_geotiff(path: &Path, f: &ScalarField) -> Result<()> {
    let data: Vec<f32> = f
        .values()
        .as_slice()
        .iter()
        .zip(f.validity().as_slice())
        .map(|(&v, &ok)| if ok { v as f32 } else { FIELD_NODATA })
        .collect();
    write_geotiff::<colortype::Gray32Float>(path, f.geometry(), &data, Some(&FIELD_NODATA.to_string()), None)
}

/// Multiband float32 GeoTIFF (1 to 8 bands, chunky). Invalid pixels are written as
/// [`FIELD_NODATA`] in every band.
pub fn write_raster_geotiff(path: &Path, r: &Raster) -> Result<()> {
    let n = r.bands().len();
    let len = r.geometry().len();
    let mut data = Vec::with_capacity(n * len);
    for i in 0..len {
        let ok = r.validity().as_slice()[i];
        for band in r.bands() {
            data.push(if ok {
                band.values.as_slice()[i] as f32
            } else {
                FIELD_NODATA
            });
        }
    }
    let nd = FIELD_NODATA.to_string();
    let g = r.geometry();
    let nd = Some(nd.as_str());
    let names = r.band_names();
    let names = Some(names.as_slice());
    match n {
        1 => write_geotiff::<MultiF32<1>>(path, g, &data, nd, names),
        2 => write_geotiff::<MultiF32<2>>(path, g, &data, nd, names),
        3 => write_geotiff::<MultiF32<3>>(path, g, &data, nd, names),
        4 => write_geotiff::<MultiF32<4>>(path, g, &data, nd, names),
        5 => write_geotiff::<MultiF32<5>>(path, g, &data, nd, names),
        6 => write_geotiff::<MultiF32<6>>(path, g, &data, nd, names),
        7 => write_geotiff::<MultiF32<7>>(path, g, &data, nd, names),
        8 => write_geotiff::<MultiF32<8>>(path, g, &data, nd, names),
        _ => Err(invalid(path, format!("cannot write {n} bands (1 to 8 supported)"))),
    }
}

/// Writes `N`-band uint16 data (interleaved) with an optional nodata value.
pub fn write_u16_geotiff<const N: usize>(
    path: &Path,
    g: &GridGeometry,
    interleaved: &[u16],
    nodata: Option<u16>,
) -> Result<()> {
    let nd = nodata.map(|v| v.to_string());
    write_geotiff::<MultiU16<N>>(path, g, interleaved, nd.as_deref(), None)
}

/// Loads a single-band mask. Nodata pixels (GDAL nodata tag or code 255) are invalid; any other
/// nonzero value is water.
pub fn load_mask(path: &Path) -> Result<WaterMask> {
    let r = load_raster(path, RasterFormat::infer(path))?;
    let band = single_band(path, &r)?;
    let validity = Plane::from_fn(band.width(), band.height(), |row, col| {
        r.validity().at(row, col) && band.at(row, col) != MASK_NODATA as f64
    });
    let water = band.map(|&v| v != 0.0);
    WaterMask::new(r.geometry().clone(), water, validity)
}

/// Loads a single-band real-valued field (e.g. a water probability map).
pub fn load_field(path: &Path) -> Result<ScalarField> {
    let r = load_raster(path, RasterFormat::infer(path))?;
    let band = single_band(path, &r)?.clone();
    ScalarField::new(r.geometry().clone(), band, r.validity().clone())
}

/// Loads a single-band class-id map; nodata pixels get id 0.
pub fn load_classes(path: &Path) -> Result<ClassMap> {
    let r = load_raster(path, RasterFormat::infer(path))?;
    let band = single_band(path, &r)?;
    let ids = Plane::from_fn(band.width(), band.height(), |row, col| {
        let v = band.at(row, col);
        if r.validity().at(row, col) && v >= 0.0 && v <= u16::MAX as f64 {
            v as u16
        } else {
            0
        }
    });
    ClassMap::new(r.geometry().clone(), ids)
}

fn single_band<'a>(path: &Path, r: &'a Raster) -> Result<&'a Plane<f64>> {
    match r.bands() {
        [band] => Ok(&band.values),
        bands => Err(invalid(path, format!("expected 1 band, found {}", bands.len()))),
    }
}
