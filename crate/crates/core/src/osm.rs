//! Minimal OpenStreetMap XML import: nodes and highway ways only.

use std::collections::{BTreeMap, HashMap};

use quick_xml::events::{BytesStart, Event};
use quick_xml::reader::Reader;

use crate::error::{Error, Result};
use crate::geometry::{Point2, RoadSegmentSpec};

pub const EARTH_RADIUS: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsmNode {
    pub id: i64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsmWay {
    pub id: i64,
    pub node_refs: Vec<i64>,
    pub tags: BTreeMap<String, String>,
}

/// Local equirectangular projection around a fixed reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub ref_lat: f64,
    pub ref_lon: f64,
    pub earth_radius: f64,
}

impl Projection {
    pub fn new(ref_lat: f64, ref_lon: f64) -> Self {
        Self {
            ref_lat,
            ref_lon,
            earth_radius: EARTH_RADIUS,
        }
    }

    /// Centered on the mean coordinate of `nodes`.
    pub fn centroid<'a>(nodes: impl IntoIterator<Item = &'a OsmNode>) -> Option<Self> {
        let (mut lat, mut lon, mut n) = (0.0, 0.0, 0usize);
        for node in nodes {
            lat += node.lat;
            lon += node.lon;
            n += 1;
        }
        (n > 0).then(|| Self::new(lat / n as f64, lon / n as f64))
    }

    pub fn project(&self, lat: f64, lon: f64) -> Point2 {
        let k = self.earth_radius * std::f64::consts::PI / 180.0;
        Point2::new(
            k * (lon - self.ref_lon) * self.ref_lat.to_radians().cos(),
            k * (lat - self.ref_lat),
        )
    }

    /// Inverse of [`Projection::project`], returning `(lat, lon)`.
    pub fn unproject(&self, p: Point2) -> (f64, f64) {
        let k = self.earth_radius * std::f64::consts::PI / 180.0;
        (
            self.ref_lat + p.y / k,
            self.ref_lon + p.x / (k * self.ref_lat.to_radians().cos()),
        )
    }
}

fn line_of(text: &str, pos: u64) -> usize {
    let end = (pos as usize).min(text.len());
    1 + text.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count()
}

fn attr_map(e: &BytesStart, text: &str, pos: u64) -> Result<HashMap<String, String>> {
    let xml_err = |message: String| Error::Xml {
        line: line_of(text, pos),
        message,
    };
    let mut map = HashMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|e| xml_err(e.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value().map_err(|e| xml_err(e.to_string()))?;
        map.insert(key, value.into_owned());
    }
    Ok(map)
}

fn parse_attr<T: std::str::FromStr>(
    attrs: &HashMap<String, String>,
    key: &str,
    element: &str,
    line: usize,
) -> Result<T> {
    let raw = attrs.get(key).ok_or_else(|| Error::Xml {
        line,
        message: format!("<{element}> without `{key}`"),
    })?;
    raw.trim().parse().map_err(|_| Error::Xml {
        line,
        message: format!("<{element}> has invalid `{key}` {raw:?}"),
    })
}

/// Extracts every `<node>` and every `<way>` (with its `<nd>` refs and
/// `<tag>`s). Other elements are ignored. Ways with fewer than two refs are
/// dropped.
pub fn parse_osm(text: &str) -> Result<(Vec<OsmNode>, Vec<OsmWay>)> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().check_end_names = true;
    let mut nodes = Vec::new();
    let mut ways = Vec::new();
    let mut way: Option<OsmWay> = None;
    let mut depth = 0usize;
    loop {
        let pos = reader.buffer_position();
        let event = reader.read_event().map_err(|e| Error::Xml {
            line: line_of(text, reader.error_position()),
            message: e.to_string(),
        })?;
        let line = line_of(text, pos);
        let (e, opened) = match &event {
            Event::Start(e) => {
                depth += 1;
                (e, true)
            }
            Event::Empty(e) => (e, false),
            Event::End(e) => {
                depth -= 1;
                if e.name().as_ref() == b"way" {
                    ways.extend(way.take().filter(|w| w.node_refs.len() >= 2));
                }
                continue;
            }
            Event::Eof => break,
            _ => continue,
        };
        match e.name().as_ref() {
            b"node" => {
                let attrs = attr_map(e, text, pos)?;
                let node = OsmNode {
                    id: parse_attr(&attrs, "id", "node", line)?,
                    lat: parse_attr(&attrs, "lat", "node", line)?,
                    lon: parse_attr(&attrs, "lon", "node", line)?,
                };
                if !((-90.0..=90.0).contains(&node.lat) && (-180.0..=180.0).contains(&node.lon)) {
                    return Err(Error::Xml {
                        line,
                        message: format!("node {} has coordinates out of range", node.id),
                    });
                }
                nodes.push(node);
            }
            b"way" => {
                let attrs = attr_map(e, text, pos)?;
                let w = OsmWay {
                    id: parse_attr(&attrs, "id", "way", line)?,
                    node_refs: Vec::new(),
                    tags: BTreeMap::new(),
                };
                if opened {
                    way = Some(w);
                }
            }
            b"nd" => {
                if let Some(w) = way.as_mut() {
                    let attrs = attr_map(e, text, pos)?;
                    w.node_refs.push(parse_attr(&attrs, "ref", "nd", line)?);
                }
            }
            b"tag" => {
                if let Some(w) = way.as_mut() {
                    let attrs = attr_map(e, text, pos)?;
                    let k: String = parse_attr(&attrs, "k", "tag", line)?;
                    let v: String = parse_attr(&attrs, "v", "tag", line)?;
                    w.tags.insert(k, v);
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Error::Xml {
            line: line_of(text, text.len() as u64),
            message: "unexpected end of document: unclosed element".into(),
        });
    }
    let known: HashMap<i64, ()> = nodes.iter().map(|n| (n.id, ())).collect();
    for w in &ways {
        if let Some(&missing) = w.node_refs.iter().find(|r| !known.contains_key(r)) {
            return Err(Error::MissingNode {
                way: w.id,
                node: missing,
            });
        }
    }
    Ok((nodes, ways))
}

/// Default carriageway width (m) for each drivable highway class.
pub fn default_width(highway: &str) -> Option<f64> {
    Some(match highway {
        "primary" => 7.0,
        "secondary" => 6.5,
        "tertiary" => 6.0,
        "residential" => 5.0,
        "unclassified" => 5.0,
        "living_street" => 4.0,
        _ => return None,
    })
}

/// A `width` tag such as `8`, `7.5` or `6 m`; `None` if not a positive number.
fn parse_width(tag: &str) -> Option<f64> {
    let t = tag.trim();
    let t = t.strip_suffix('m').unwrap_or(t).trim_end();
    t.parse::<f64>().ok().filter(|w| w.is_finite() && *w > 0.0)
}

/// Whether a way is one of the imported highway classes.
pub fn is_drivable(way: &OsmWay) -> bool {
    way.tags.get("highway").and_then(|h| default_width(h)).is_some()
}

/// Converts drivable ways to roads, in input order, with ids `way/<id>`.
pub fn ways_to_roads(nodes: &[OsmNode], ways: &[OsmWay], proj: &Projection) -> Result<Vec<RoadSegmentSpec>> {
    let index: HashMap<i64, &OsmNode> = nodes.iter().map(|n| (n.id, n)).collect();
    let mut roads = Vec::new();
    for way in ways {
        let Some(default) = way.tags.get("highway").and_then(|h| default_width(h)) else {
            continue;
        };
        let width = way.tags.get("width").and_then(|w| parse_width(w)).unwrap_or(default);
        let mut centerline: Vec<Point2> = Vec::with_capacity(way.node_refs.len());
        for r in &way.node_refs {
            let node = index.get(r).ok_or(Error::MissingNode { way: way.id, node: *r })?;
            let p = proj.project(node.lat, node.lon);
            // repeated refs would give zero-length segments
            if centerline.last() != Some(&p) {
                centerline.push(p);
            }
        }
        if centerline.len() >= 2 {
            roads.push(RoadSegmentSpec::new(format!("way/{}", way.id), width, centerline));
        }
    }
    if roads.is_empty() {
        return Err(Error::NoDrivableRoads);
    }
    Ok(roads)
}

/// Parses a document and converts it with the projection centered on the
/// centroid of the nodes used by drivable ways.
pub fn import(text: &str) -> Result<(Projection, Vec<RoadSegmentSpec>)> {
    let (nodes, ways) = parse_osm(text)?;
    let index: HashMap<i64, &OsmNode> = nodes.iter().map(|n| (n.id, n)).collect();
    let mut used: Vec<i64> = ways
        .iter()
        .filter(|w| is_drivable(w))
        .flat_map(|w| w.node_refs.iter().copied())
        .collect();
    used.sort_unstable();
    used.dedup();
    let proj = Projection::centroid(used.iter().map(|id| index[id])).ok_or(Error::NoDrivableRoads)?;
    let roads = ways_to_roads(&nodes, &ways, &proj)?;
    Ok((proj, roads))
}
