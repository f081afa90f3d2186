//! Streaming parser for the OSM XML 0.6 subset: `node`, `way`, `nd`, `tag`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

pub type Tags = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawNode {
    pub id: i64,
    pub location: GeoPoint,
    pub tags: Tags,
}

impl RawNode {
    pub fn is_poi(&self) -> bool {
        ["amenity", "shop", "tourism"]
            .iter()
            .any(|k| self.tags.contains_key(*k))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawWay {
    pub id: i64,
    pub node_refs: Vec<i64>,
    pub tags: Tags,
}

impl RawWay {
    pub fn road_class(&self) -> Option<RoadClass> {
        self.tags.get("highway").and_then(|h| RoadClass::from_highway(h))
    }
}

/// OSM highway hierarchy; `*_link` values fold into their parent class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadClass {
    Motorway,
    Trunk,
    Primary,
    Secondary,
    Tertiary,
    Unclassified,
    Residential,
    Service,
    Other,
}

impl RoadClass {
    pub const ALL: [RoadClass; 9] = [
        RoadClass::Motorway,
        RoadClass::Trunk,
        RoadClass::Primary,
        RoadClass::Secondary,
        RoadClass::Tertiary,
        RoadClass::Unclassified,
        RoadClass::Residential,
        RoadClass::Service,
        RoadClass::Other,
    ];

    /// Whitelisted classes for a `highway=*` value, `None` for non-roads.
    pub fn from_highway(value: &str) -> Option<RoadClass> {
        let base = value.strip_suffix("_link").unwrap_or(value);
        match base {
            "motorway" => Some(RoadClass::Motorway),
            "trunk" => Some(RoadClass::Trunk),
            "primary" => Some(RoadClass::Primary),
            "secondary" => Some(RoadClass::Secondary),
            "tertiary" => Some(RoadClass::Tertiary),
            "unclassified" => Some(RoadClass::Unclassified),
            "residential" => Some(RoadClass::Residential),
            "service" => Some(RoadClass::Service),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RoadClass::Motorway => "motorway",
            RoadClass::Trunk => "trunk",
            RoadClass::Primary => "primary",
            RoadClass::Secondary => "secondary",
            RoadClass::Tertiary => "tertiary",
            RoadClass::Unclassified => "unclassified",
            RoadClass::Residential => "residential",
            RoadClass::Service => "service",
            RoadClass::Other => "other",
        }
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoadClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "other" {
            return Ok(RoadClass::Other);
        }
        RoadClass::from_highway(s).ok_or_else(|| Error::Malformed(format!("unknown road class `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct UnresolvedRef {
    pub way_id: i64,
    pub node_id: i64,
}

/// Everything read from one extract.
#[derive(Clone, Debug, Default)]
pub struct OsmExtract {
    /// All nodes, in document order.
    pub nodes: Vec<RawNode>,
    /// Ways whose references all resolved, in document order.
    pub ways: Vec<RawWay>,
    /// Missing node references; the owning ways were dropped.
    pub unresolved: Vec<UnresolvedRef>,
    /// Ways dropped for having fewer than two node references.
    pub degenerate_ways: Vec<i64>,
    /// Counts of unsupported elements (relations, changesets, ...) that were skipped.
    pub ignored_elements: BTreeMap<String, usize>,
}

impl OsmExtract {
    pub fn node_lookup(&self) -> HashMap<i64, &RawNode> {
        self.nodes.iter().map(|n| (n.id, n)).collect()
    }

    pub fn pois(&self) -> impl Iterator<Item = &RawNode> {
        self.nodes.iter().filter(|n| n.is_poi())
    }

    /// Canonical XML for the nodes and ways held by this extract.
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\">\n");
        for n in &self.nodes {
            out.push_str(&format!(
                "  <node id=\"{}\" lat=\"{:.7}\" lon=\"{:.7}\"",
                n.id,
                n.location.lat(),
                n.location.lon()
            ));
            if n.tags.is_empty() {
                out.push_str("/>\n");
            } else {
                out.push_str(">\n");
                write_tags(&mut out, &n.tags);
                out.push_str("  </node>\n");
            }
        }
        for w in &self.ways {
            out.push_str(&format!("  <way id=\"{}\">\n", w.id));
            for r in &w.node_refs {
                out.push_str(&format!("    <nd ref=\"{r}\"/>\n"));
            }
            write_tags(&mut out, &w.tags);
            out.push_str("  </way>\n");
        }
        out.push_str("</osm>\n");
        out
    }
}

fn write_tags(out: &mut String, tags: &Tags) {
    for (k, v) in tags {
        out.push_str(&format!(
            "    <tag k=\"{}\" v=\"{}\"/>\n",
            quick_xml::escape::escape(k.as_str()),
            quick_xml::escape::escape(v.as_str())
        ));
    }
}

enum Current {
    None,
    Node(RawNode),
    Way(RawWay),
}

pub fn parse_osm_file(path: &Path) -> Result<OsmExtract> {
    let file = std::fs::File::open(path)?;
    parse_osm_xml(std::io::BufReader::new(file))
}

pub fn parse_osm_xml<R: BufRead>(input: R) -> Result<OsmExtract> {
    let mut reader = Reader::from_reader(input);
    let mut buf = Vec::new();
    let mut extract = OsmExtract::default();
    let mut current = Current::None;
    let mut all_ways = Vec::new();
    let mut seen_nodes = HashSet::new();
    // Depth inside an unsupported element whose children must not be interpreted.
    let mut skip_depth = 0usize;

    loop {
        let offset = reader.buffer_position() as u64;
        let event = reader.read_event_into(&mut buf).map_err(|e| Error::Xml {
            offset: reader.error_position() as u64,
            message: e.to_string(),
        })?;
        match event {
            Event::Eof => break,
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                if skip_depth > 0 {
                    if !is_empty {
                        skip_depth += 1;
                    }
                    buf.clear();
                    continue;
                }
                match e.name().as_ref() {
                    b"osm" | b"bounds" | b"bound" => {}
                    b"node" => {
                        let attrs = attributes(e, offset)?;
                        let id = parse_attr::<i64>(&attrs, "id", offset)?;
                        let lat = parse_attr::<f64>(&attrs, "lat", offset)?;
                        let lon = parse_attr::<f64>(&attrs, "lon", offset)?;
                        let location = GeoPoint::new(lat, lon).map_err(|err| Error::Xml {
                            offset,
                            message: err.to_string(),
                        })?;
                        if !seen_nodes.insert(id) {
                            return Err(Error::Xml {
                                offset,
                                message: format!("duplicate node id {id}"),
                            });
                        }
                        let node = RawNode { id, location, tags: Tags::new() };
                        if is_empty {
                            extract.nodes.push(node);
                        } else {
                            current = Current::Node(node);
                        }
                    }
                    b"way" => {
                        let attrs = attributes(e, offset)?;
                        let id = parse_attr::<i64>(&attrs, "id", offset)?;
                        let way = RawWay { id, node_refs: Vec::new(), tags: Tags::new() };
                        if is_empty {
                            all_ways.push(way);
                        } else {
                            current = Current::Way(way);
                        }
                    }
                    b"nd" => {
                        let attrs = attributes(e, offset)?;
                        let r = parse_attr::<i64>(&attrs, "ref", offset)?;
                        match &mut current {
                            Current::Way(w) => w.node_refs.push(r),
                            _ => {
                                return Err(Error::Xml {
                                    offset,
                                    message: "<nd> outside of <way>".into(),
                                })
                            }
                        }
                        if !is_empty {
                            skip_depth = 1;
                        }
                    }
                    b"tag" => {
                        let attrs = attributes(e, offset)?;
                        let k = attr(&attrs, "k", offset)?.to_string();
                        let v = attr(&attrs, "v", offset)?.to_string();
                        match &mut current {
                            Current::Node(n) => {
                                n.tags.insert(k, v);
                            }
                            Current::Way(w) => {
                                w.tags.insert(k, v);
                            }
                            Current::None => {
                                return Err(Error::Xml {
                                    offset,
                                    message: "<tag> outside of <node> or <way>".into(),
                                })
                            }
                        }
                        if !is_empty {
                            skip_depth = 1;
                        }
                    }
                    other => {
                        let name = String::from_utf8_lossy(other).into_owned();
                        *extract.ignored_elements.entry(name).or_default() += 1;
                        if !is_empty {
                            skip_depth = 1;
                        }
                    }
                }
            }
            Event::End(ref e) => {
                if skip_depth > 0 {
                    skip_depth -= 1;
                } else {
                    match e.name().as_ref() {
                        b"node" => {
                            if let Current::Node(n) = std::mem::replace(&mut current, Current::None) {
                                extract.nodes.push(n);
                            }
                        }
                        b"way" => {
                            if let Current::Way(w) = std::mem::replace(&mut current, Current::None) {
                                all_ways.push(w);
                            }
                        }
                        _ => {}
                    }
                }
            }
            _ => {}
        }
        buf.clear();
    }

    for way in all_ways {
        let missing: Vec<i64> = way
            .node_refs
            .iter()
            .copied()
            .filter(|r| !seen_nodes.contains(r))
            .collect();
        if !missing.is_empty() {
            extract
                .unresolved
                .extend(missing.into_iter().map(|node_id| UnresolvedRef { way_id: way.id, node_id }));
        } else if way.node_refs.len() < 2 {
            extract.degenerate_ways.push(way.id);
        } else {
            extract.ways.push(way);
        }
    }
    Ok(extract)
}

fn attributes(e: &BytesStart<'_>, offset: u64) -> Result<Vec<(String, String)>> {
    e.attributes()
        .map(|a| {
            let a = a.map_err(|err| Error::Xml { offset, message: err.to_string() })?;
            let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
            let value = a
                .unescape_value()
                .map_err(|err| Error::Xml { offset, message: err.to_string() })?
                .into_owned();
            Ok((key, value))
        })
        .collect()
}

fn attr<'a>(attrs: &'a [(String, String)], key: &str, offset: u64) -> Result<&'a str> {
    attrs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Xml {
            offset,
            message: format!("missing attribute `{key}`"),
        })
}

fn parse_attr<T: FromStr>(attrs: &[(String, String)], key: &str, offset: u64) -> Result<T> {
    let raw = attr(attrs, key, offset)?;
    raw.parse().map_err(|_| Error::Xml {
        offset,
        message: format!("attribute `{key}` has invalid value `{raw}`"),
    })
}

/// Keeps ways whose `highway` tag maps to a whitelisted [`RoadClass`], sorted by id.
pub fn filter_roads(ways: &[RawWay]) -> Vec<RawWay> {
    let mut roads: Vec<RawWay> = ways
        .iter()
        .filter(|w| w.road_class().is_some())
        .cloned()
        .collect();
    roads.sort_by_key(|w| w.id);
    roads
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<osm version="0.6" generator="test">
  <bounds minlat="0" minlon="0" maxlat="1" maxlon="1"/>
  <node id="1" lat="0.0010000" lon="0.0010000"/>
  <node id="2" lat="0.0020000" lon="0.0010000">
    <tag k="amenity" v="cafe"/>
    <tag k="name" v="Bob &amp; Co"/>
  </node>
  <node id="3" lat="0.0030000" lon="0.0010000"/>
  <way id="10">
    <nd ref="1"/>
    <nd ref="2"/>
    <nd ref="3"/>
    <tag k="highway" v="residential"/>
  </way>
  <relation id="99">
    <member type="way" ref="10" role=""/>
    <tag k="type" v="route"/>
  </relation>
</osm>
"#;

    #[test]
    fn parses_fixture() {
        let x = parse_osm_xml(FIXTURE.as_bytes()).unwrap();
        assert_eq!(x.nodes.len(), 3);
        assert_eq!(x.ways.len(), 1);
        assert_eq!(x.ways[0].node_refs, vec![1, 2, 3]);
        assert_eq!(x.ways[0].road_class(), Some(RoadClass::Residential));
        assert_eq!(x.nodes[1].tags["name"], "Bob & Co");
        assert_eq!(x.pois().count(), 1);
        assert_eq!(x.ignored_elements.get("relation"), Some(&1));
        assert!(x.unresolved.is_empty());
    }

    #[test]
    fn dangling_reference_drops_way() {
        let xml = r#"<osm><node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="1"/>
            <way id="5"><nd ref="1"/><nd ref="7"/><tag k="highway" v="primary"/></way>
            <way id="6"><nd ref="1"/><nd ref="2"/><tag k="highway" v="primary"/></way></osm>"#;
        let x = parse_osm_xml(xml.as_bytes()).unwrap();
        assert_eq!(x.ways.len(), 1);
        assert_eq!(x.ways[0].id, 6);
        assert_eq!(x.unresolved, vec![UnresolvedRef { way_id: 5, node_id: 7 }]);
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let xml = "<osm><node id=\"1\" lat=\"0\" lon=\"0\"></way></osm>";
        match parse_osm_xml(xml.as_bytes()) {
            Err(Error::Xml { offset, .. }) => assert!(offset > 0),
            other => panic!("expected xml error, got {other:?}"),
        }
        let bad_lat = r#"<osm><node id="1" lat="91" lon="0"/></osm>"#;
        assert!(matches!(parse_osm_xml(bad_lat.as_bytes()), Err(Error::Xml { .. })));
    }

    #[test]
    fn canonical_round_trip() {
        let x = parse_osm_xml(FIXTURE.as_bytes()).unwrap();
        let again = parse_osm_xml(x.to_xml().as_bytes()).unwrap();
        assert_eq!(x.nodes, again.nodes);
        assert_eq!(x.ways, again.ways);
        assert_eq!(again.to_xml(), x.to_xml());
    }

    #[test]
    fn filter_keeps_whitelisted_sorted() {
        let tagged = |id: i64, k: &str, v: &str| RawWay {
            id,
            node_refs: vec![1, 2],
            tags: [(k.to_string(), v.to_string())].into_iter().collect(),
        };
        let ways = vec![
            tagged(9, "highway", "primary"),
            tagged(3, "building", "yes"),
            tagged(7, "highway", "footway"),
            tagged(1, "highway", "motorway_link"),
            tagged(5, "highway", "service"),
            tagged(4, "highway", "path"),
            tagged(8, "highway", "residential"),
            tagged(2, "highway", "tertiary"),
            tagged(6, "landuse", "grass"),
            tagged(10, "highway", "unclassified"),
        ];
        let expected: Vec<i64> = {
            let mut ids: Vec<i64> = ways
                .iter()
                .filter(|w| {
                    w.tags.get("highway").is_some_and(|h| {
                        !["footway", "path"].contains(&h.as_str())
                    })
                })
                .map(|w| w.id)
                .collect();
            ids.sort();
            ids
        };
        let kept: Vec<i64> = filter_roads(&ways).iter().map(|w| w.id).collect();
        assert_eq!(kept, expected);
        assert_eq!(kept.len(), 6);
    }

    #[test]
    fn parse_is_deterministic() {
        let a = parse_osm_xml(FIXTURE.as_bytes()).unwrap();
        let b = parse_osm_xml(FIXTURE.as_bytes()).unwrap();
        assert_eq!(a.to_xml(), b.to_xml());
    }
}
