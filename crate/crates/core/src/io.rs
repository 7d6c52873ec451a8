//! File formats: slice and map dumps with a checksummed text header,
//! versioned network weights, PFM float images, and PNG previews.
//!
//! Slice and map files share one layout: exactly eight `key value` text
//! lines (magic, version, resolution, domain, params, wi, noise_target,
//! checksum) followed by a little-endian `f32` payload. The checksum is
//! FNV-1a over the payload bytes, so partial bakes are detected on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::bsdf::{BsdfParams, MaterialKind, ScatterModel};
use crate::math::{Direction, Domain, Rgb, SquareCoord};
use crate::neural::{Activation, Layer, MlpWeights, NetKind};
use crate::slice::SliceImage;
use crate::transport::{ImportanceMap, MapMeta};
use crate::Error;

const SLICE_MAGIC: &str = "OTSL";
const MAP_MAGIC: &str = "OTIM";
const WEIGHTS_MAGIC: &[u8; 4] = b"OTNW";
const FORMAT_VERSION: u32 = 1;

/// FNV-1a 64-bit, printed as 16 hex digits in headers.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn domain_name(domain: Domain) -> &'static str {
    match domain {
        Domain::Hemisphere => "hemisphere",
        Domain::Sphere => "sphere",
    }
}

fn parse_domain(s: &str) -> crate::Result<Domain> {
    match s {
        "hemisphere" => Ok(Domain::Hemisphere),
        "sphere" => Ok(Domain::Sphere),
        _ => Err(malformed("header", format!("unknown domain `{s}`"))),
    }
}

fn params_field(p: &BsdfParams) -> String {
    let model = match p.model {
        ScatterModel::SingleBounce => "single",
        ScatterModel::MultiBounce => "multi",
    };
    let kind = match p.kind {
        MaterialKind::Conductor => "conductor",
        MaterialKind::Dielectric => "dielectric",
    };
    format!(
        "{},{},{},{},{},{},{},{}",
        p.r0.r, p.r0.g, p.r0.b, p.alpha_x, p.alpha_y, p.eta, model, kind
    )
}

fn parse_params(s: &str) -> crate::Result<BsdfParams> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 8 {
        return Err(malformed("header", format!("bad params field `{s}`")));
    }
    let num = |i: usize| -> crate::Result<f64> {
        parts[i]
            .parse()
            .map_err(|_| malformed("header", format!("bad number `{}`", parts[i])))
    };
    let model = match parts[6] {
        "single" => ScatterModel::SingleBounce,
        "multi" => ScatterModel::MultiBounce,
        other => return Err(malformed("header", format!("unknown model `{other}`"))),
    };
    let kind = match parts[7] {
        "conductor" => MaterialKind::Conductor,
        "dielectric" => MaterialKind::Dielectric,
        other => return Err(malformed("header", format!("unknown kind `{other}`"))),
    };
    Ok(BsdfParams {
        r0: Rgb::new(num(0)?, num(1)?, num(2)?),
        alpha_x: num(3)?,
        alpha_y: num(4)?,
        eta: num(5)?,
        model,
        kind,
    })
}

fn malformed(kind: &'static str, reason: impl Into<String>) -> Error {
    Error::MalformedFile {
        kind,
        reason: reason.into(),
    }
}

struct Header {
    magic: String,
    version: u32,
    resolution: usize,
    domain: Domain,
    params: BsdfParams,
    wi: Direction,
    #[allow(dead_code)]
    noise_target: f64,
    checksum: u64,
}

#[allow(clippy::too_many_arguments)]
fn write_header<W: Write>(
    out: &mut W,
    magic: &str,
    resolution: usize,
    domain: Domain,
    params: &BsdfParams,
    wi: Direction,
    noise_target: f64,
    checksum: u64,
) -> crate::Result<()> {
    writeln!(out, "magic {magic}")?;
    writeln!(out, "version {FORMAT_VERSION}")?;
    writeln!(out, "resolution {resolution}")?;
    writeln!(out, "domain {}", domain_name(domain))?;
    writeln!(out, "params {}", params_field(params))?;
    writeln!(out, "wi {},{},{}", wi.x(), wi.y(), wi.z())?;
    writeln!(out, "noise_target {noise_target}")?;
    writeln!(out, "checksum {checksum:016x}")?;
    Ok(())
}

fn read_header<R: Read>(reader: &mut R) -> crate::Result<Header> {
    let mut fields = Vec::with_capacity(8);
    let mut line = Vec::new();
    for _ in 0..8 {
        line.clear();
        loop {
            let mut byte = [0u8; 1];
            reader.read_exact(&mut byte)?;
            if byte[0] == b'\n' {
                break;
            }
            line.push(byte[0]);
            if line.len() > 512 {
                return Err(malformed("header", "header line too long"));
            }
        }
        let text = String::from_utf8(line.clone())
            .map_err(|_| malformed("header", "non-utf8 header"))?;
        let (key, value) = text
            .split_once(' ')
            .ok_or_else(|| malformed("header", format!("bad header line `{text}`")))?;
        fields.push((key.to_string(), value.to_string()));
    }
    let get = |key: &str| -> crate::Result<&str> {
        fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| malformed("header", format!("missing field `{key}`")))
    };
    let wi_parts: Vec<&str> = get("wi")?.split(',').collect();
    if wi_parts.len() != 3 {
        return Err(malformed("header", "bad wi field"));
    }
    let parse_f64 = |s: &str| -> crate::Result<f64> {
        s.parse()
            .map_err(|_| malformed("header", format!("bad number `{s}`")))
    };
    let wi = Direction::new(
        parse_f64(wi_parts[0])?,
        parse_f64(wi_parts[1])?,
        parse_f64(wi_parts[2])?,
    )?;
    Ok(Header {
        magic: get("magic")?.to_string(),
        version: get("version")?
            .parse()
            .map_err(|_| malformed("header", "bad version"))?,
        resolution: get("resolution")?
            .parse()
            .map_err(|_| malformed("header", "bad resolution"))?,
        domain: parse_domain(get("domain")?)?,
        params: parse_params(get("params")?)?,
        wi,
        noise_target: parse_f64(get("noise_target")?)?,
        checksum: u64::from_str_radix(get("checksum")?, 16)
            .map_err(|_| malformed("header", "bad checksum"))?,
    })
}

fn payload_f32s(values: impl Iterator<Item = f32>) -> Vec<u8> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Writes a slice dump: header + per-texel `(r, g, b, density)` float32.
pub fn write_slice(
    path: &Path,
    slice: &SliceImage,
    params: &BsdfParams,
    wi: Direction,
    noise_target: f64,
) -> crate::Result<()> {
    let payload = payload_f32s(
        slice
            .rgb
            .iter()
            .zip(&slice.density)
            .flat_map(|(c, &d)| [c.r as f32, c.g as f32, c.b as f32, d as f32]),
    );
    let checksum = fnv1a64(&payload);
    let mut out = BufWriter::new(File::create(path)?);
    write_header(
        &mut out,
        SLICE_MAGIC,
        slice.resolution,
        slice.domain,
        params,
        wi,
        noise_target,
        checksum,
    )?;
    out.write_all(&payload)?;
    Ok(())
}

/// Reads a slice dump back, verifying the checksum.
pub fn read_slice(path: &Path) -> crate::Result<(SliceImage, BsdfParams, Direction)> {
    let mut reader = BufReader::new(File::open(path)?);
    let header = read_header(&mut reader)?;
    if header.magic != SLICE_MAGIC || header.version != FORMAT_VERSION {
        return Err(malformed("slice", format!("bad magic `{}`", header.magic)));
    }
    let n = header.resolution * header.resolution;
    let mut payload = vec![0u8; n * 4 * 4];
    reader.read_exact(&mut payload)?;
    verify_checksum(path, header.checksum, &payload)?;
    let mut rgb = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    for i in 0..n {
        let at = |k: usize| {
            let o = (i * 4 + k) * 4;
            f32::from_le_bytes([payload[o], payload[o + 1], payload[o + 2], payload[o + 3]]) as f64
        };
        rgb.push(Rgb::new(at(0), at(1), at(2)));
        density.push(at(3));
    }
    let slice = SliceImage {
        resolution: header.resolution,
        domain: header.domain,
        rgb,
        density,
        walk_stats: Default::default(),
    };
    Ok((slice, header.params, header.wi))
}

/// Writes a map dump: header + per-texel `(u, v, sw_r, sw_g, sw_b)` float32.
pub fn write_map(path: &Path, map: &ImportanceMap, noise_target: f64) -> crate::Result<()> {
    let meta = map
        .meta
        .as_ref()
        .ok_or_else(|| malformed("map", "map has no bake provenance; cannot serialize"))?;
    let payload = payload_f32s(map.uv.iter().zip(&map.sw).flat_map(|(uv, sw)| {
        [
            uv.s as f32,
            uv.t as f32,
            sw.r as f32,
            sw.g as f32,
            sw.b as f32,
        ]
    }));
    let checksum = fnv1a64(&payload);
    let mut out = BufWriter::new(File::create(path)?);
    write_header(
        &mut out,
        MAP_MAGIC,
        map.resolution,
        map.domain,
        &meta.params,
        meta.wi,
        noise_target,
        checksum,
    )?;
    out.write_all(&payload)?;
    Ok(())
}

/// Reads a map dump; the paired slice supplies the density (and pdf).
pub fn read_map(path: &Path, slice: &SliceImage) -> crate::Result<ImportanceMap> {
    let mut reader = BufReader::new(File::open(path)?);
    let header = read_header(&mut reader)?;
    if header.magic != MAP_MAGIC || header.version != FORMAT_VERSION {
        return Err(malformed("map", format!("bad magic `{}`", header.magic)));
    }
    let n = header.resolution * header.resolution;
    let mut payload = vec![0u8; n * 5 * 4];
    reader.read_exact(&mut payload)?;
    verify_checksum(path, header.checksum, &payload)?;
    let mut uv = Vec::with_capacity(n);
    let mut sw = Vec::with_capacity(n);
    for i in 0..n {
        let at = |k: usize| {
            let o = (i * 5 + k) * 4;
            f32::from_le_bytes([payload[o], payload[o + 1], payload[o + 2], payload[o + 3]]) as f64
        };
        uv.push(SquareCoord::new(at(0), at(1)));
        sw.push(Rgb::new(at(2), at(3), at(4)));
    }
    // Two-band (sphere) maps: the split row is where stored targets cross
    // into the refraction half; hemisphere maps are a single band.
    let seam_row = match header.domain {
        Domain::Hemisphere => header.resolution,
        Domain::Sphere => {
            let res = header.resolution;
            let mut row = res;
            for y in 0..res {
                let mean_t: f64 =
                    uv[y * res..(y + 1) * res].iter().map(|c| c.t).sum::<f64>() / res as f64;
                if mean_t >= 0.5 {
                    row = y;
                    break;
                }
            }
            row
        }
    };
    // Sphere maps store the per-half renormalized density.
    let mut density = slice.density.clone();
    if header.domain == Domain::Sphere {
        let res_d = slice.resolution;
        let half_d = res_d / 2;
        let upper_mass: f64 = density[..half_d * res_d].iter().sum();
        let split = seam_row as f64 / header.resolution as f64;
        let up_scale = split / upper_mass.max(1e-12);
        let down_scale = (1.0 - split) / (1.0 - upper_mass).max(1e-12);
        for y in 0..res_d {
            let scale = if y < half_d { up_scale } else { down_scale };
            for x in 0..res_d {
                density[y * res_d + x] *= scale;
            }
        }
    }
    Ok(ImportanceMap {
        resolution: header.resolution,
        domain: header.domain,
        uv,
        sw,
        density,
        density_resolution: slice.resolution,
        seam_row,
        meta: Some(MapMeta {
            params: header.params,
            wi: header.wi,
        }),
    })
}

fn verify_checksum(path: &Path, expected: u64, payload: &[u8]) -> crate::Result<()> {
    let actual = fnv1a64(payload);
    if actual != expected {
        return Err(Error::ChecksumMismatch {
            path: path.display().to_string(),
            expected: format!("{expected:016x}"),
            actual: format!("{actual:016x}"),
        });
    }
    Ok(())
}

/// Verifies that a slice or map file is intact (header checksum matches).
pub fn verify_file(path: &Path) -> bool {
    let inner = || -> crate::Result<bool> {
        let mut reader = BufReader::new(File::open(path)?);
        let header = read_header(&mut reader)?;
        let mut payload = Vec::new();
        reader.read_to_end(&mut payload)?;
        Ok(fnv1a64(&payload) == header.checksum)
    };
    inner().unwrap_or(false)
}

/// Versioned binary weight file: magic, version, kind tag, layer count,
/// then per layer `(in, out, activation, weights row-major, bias)`, all
/// little-endian f32.
pub fn write_weights(path: &Path, weights: &MlpWeights) -> crate::Result<()> {
    weights.validate()?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(WEIGHTS_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&[weights.kind.tag()])?;
    out.write_all(&(weights.layers.len() as u32).to_le_bytes())?;
    for layer in &weights.layers {
        out.write_all(&(layer.in_dim as u32).to_le_bytes())?;
        out.write_all(&(layer.out_dim as u32).to_le_bytes())?;
        out.write_all(&[layer.activation.tag()])?;
        for w in &layer.weights {
            out.write_all(&w.to_le_bytes())?;
        }
        for b in &layer.bias {
            out.write_all(&b.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_weights(path: &Path) -> crate::Result<MlpWeights> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(malformed("weights", "bad magic"));
    }
    let mut u32buf = [0u8; 4];
    reader.read_exact(&mut u32buf)?;
    if u32::from_le_bytes(u32buf) != FORMAT_VERSION {
        return Err(malformed("weights", "unsupported version"));
    }
    let mut byte = [0u8; 1];
    reader.read_exact(&mut byte)?;
    let kind = NetKind::from_tag(byte[0])
        .ok_or_else(|| malformed("weights", format!("unknown kind tag {}", byte[0])))?;
    reader.read_exact(&mut u32buf)?;
    let n_layers = u32::from_le_bytes(u32buf) as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(malformed("weights", format!("bad layer count {n_layers}")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        reader.read_exact(&mut u32buf)?;
        let in_dim = u32::from_le_bytes(u32buf) as usize;
        reader.read_exact(&mut u32buf)?;
        let out_dim = u32::from_le_bytes(u32buf) as usize;
        reader.read_exact(&mut byte)?;
        let activation = Activation::from_tag(byte[0])
            .ok_or_else(|| malformed("weights", format!("unknown activation {}", byte[0])))?;
        if in_dim == 0 || out_dim == 0 || in_dim > 4096 || out_dim > 4096 {
            return Err(malformed("weights", "implausible layer dims"));
        }
        let mut read_f32s = |n: usize| -> crate::Result<Vec<f32>> {
            let mut bytes = vec![0u8; n * 4];
            reader.read_exact(&mut bytes)?;
            Ok(bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect())
        };
        let weights = read_f32s(in_dim * out_dim)?;
        let bias = read_f32s(out_dim)?;
        layers.push(Layer {
            weights,
            bias,
            in_dim,
            out_dim,
            activation,
        });
    }
    let weights = MlpWeights { kind, layers };
    weights.validate()?;
    Ok(weights)
}

/// Writes a float32 RGB image as PFM (bottom-up rows, little-endian).
pub fn write_pfm(path: &Path, width: usize, height: usize, pixels: &[Rgb]) -> crate::Result<()> {
    assert_eq!(pixels.len(), width * height);
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "PF\n{width} {height}\n-1.0\n")?;
    for y in (0..height).rev() {
        for x in 0..width {
            let p = pixels[y * width + x];
            for v in [p.r as f32, p.g as f32, p.b as f32] {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Reads a PFM image (RGB or grayscale), returning row-major top-down RGB.
pub fn read_pfm(path: &Path) -> crate::Result<(usize, usize, Vec<Rgb>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut all = Vec::new();
    reader.read_to_end(&mut all)?;
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> crate::Result<String> {
        while *pos < all.len() && all[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        let start = *pos;
        while *pos < all.len() && !all[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(malformed("pfm", "truncated header"));
        }
        Ok(String::from_utf8_lossy(&all[start..*pos]).into_owned())
    };
    let magic = token(&mut pos)?;
    let channels = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        _ => return Err(malformed("pfm", format!("bad magic `{magic}`"))),
    };
    let width: usize = token(&mut pos)?
        .parse()
        .map_err(|_| malformed("pfm", "bad width"))?;
    let height: usize = token(&mut pos)?
        .parse()
        .map_err(|_| malformed("pfm", "bad height"))?;
    let scale: f64 = token(&mut pos)?
        .parse()
        .map_err(|_| malformed("pfm", "bad scale"))?;
    let little_endian = scale < 0.0;
    pos += 1; // single whitespace terminates the scale line
    let need = width * height * channels * 4;
    if all.len() < pos + need {
        return Err(malformed("pfm", "truncated payload"));
    }
    let data = &all[pos..pos + need];
    let read = |o: usize| -> f64 {
        let b = [data[o], data[o + 1], data[o + 2], data[o + 3]];
        let v = if little_endian {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        v as f64
    };
    let mut pixels = vec![Rgb::BLACK; width * height];
    for row in 0..height {
        let y = height - 1 - row; // PFM stores bottom-up
        for x in 0..width {
            let o = (row * width + x) * channels * 4;
            pixels[y * width + x] = if channels == 3 {
                Rgb::new(read(o), read(o + 4), read(o + 8))
            } else {
                Rgb::splat(read(o))
            };
        }
    }
    Ok((width, height, pixels))
}

/// Writes a tone-mapped sRGB PNG (Reinhard + gamma encode).
pub fn write_png_tonemapped(
    path: &Path,
    width: usize,
    height: usize,
    pixels: &[Rgb],
) -> crate::Result<()> {
    let to_srgb = |v: f64| -> u8 {
        let v = v.max(0.0);
        let v = v / (1.0 + v);
        let v = if v <= 0.003_130_8 {
            12.92 * v
        } else {
            1.055 * v.powf(1.0 / 2.4) - 0.055
        };
        (v * 255.0 + 0.5).clamp(0.0, 255.0) as u8
    };
    let data: Vec<u8> = pixels
        .iter()
        .flat_map(|p| [to_srgb(p.r), to_srgb(p.g), to_srgb(p.b)])
        .collect();
    write_png_rgb8(path, width, height, &data)
}

/// Map preview exactly as stored: red = u, green = v, blue = 0.
pub fn write_map_preview(path: &Path, map: &ImportanceMap) -> crate::Result<()> {
    let data: Vec<u8> = map
        .uv
        .iter()
        .flat_map(|uv| {
            [
                (uv.s * 255.0 + 0.5).clamp(0.0, 255.0) as u8,
                (uv.t * 255.0 + 0.5).clamp(0.0, 255.0) as u8,
                0u8,
            ]
        })
        .collect();
    write_png_rgb8(path, map.resolution, map.resolution, &data)
}

/// Grayscale preview of a slice's density (peak-normalized, sqrt-encoded).
pub fn write_slice_preview(path: &Path, slice: &SliceImage) -> crate::Result<()> {
    let peak = slice
        .density
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let data: Vec<u8> = slice
        .density
        .iter()
        .flat_map(|&d| {
            let v = ((d / peak).sqrt() * 255.0 + 0.5).clamp(0.0, 255.0) as u8;
            [v, v, v]
        })
        .collect();
    write_png_rgb8(path, slice.resolution, slice.resolution, &data)
}

fn write_png_rgb8(path: &Path, width: usize, height: usize, data: &[u8]) -> crate::Result<()> {
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| malformed("png", e.to_string()))?;
    writer
        .write_image_data(data)
        .map_err(|e| malformed("png", e.to_string()))?;
    Ok(())
}
