//! Gmsh MSH 2.2 ASCII reader and the native line-oriented mesh format.
//!
//! Every parse failure is reported as a [`ParseError`]; the readers never
//! panic on malformed input.

use std::collections::HashMap;
use std::io::{self, Write};

use log::warn;
use thiserror::Error;

use crate::mesh::{CompartmentMarker, Mesh, MeshError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing mandatory section ${0}")]
    MissingSection(&'static str),
    #[error("line {line}: unsupported MSH version {version} (only 2.2 is supported)")]
    UnsupportedVersion { line: usize, version: String },
    #[error("line {line}: binary MSH files are not supported")]
    Binary { line: usize },
    #[error("line {line}: element {element} references missing node {node}")]
    MissingNode { line: usize, element: u64, node: u64 },
    #[error("unsupported mesh: {0}")]
    UnsupportedMesh(String),
    #[error("byte {offset}: {message}")]
    Native { offset: usize, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// One element record of an MSH file.
#[derive(Debug, Clone, PartialEq)]
pub struct MshElement {
    pub id: u64,
    /// 1 line, 2 triangle, 4 tetrahedron, 15 point.
    pub kind: u32,
    pub tags: Vec<i64>,
    /// Dense node indices into [`MshDocument::nodes`].
    pub nodes: Vec<usize>,
}

impl MshElement {
    pub fn dim(&self) -> usize {
        element_dim(self.kind).unwrap_or(0)
    }

    /// Physical tag (the first tag), if any.
    pub fn physical(&self) -> Option<i64> {
        self.tags.first().copied()
    }
}

fn element_dim(kind: u32) -> Option<usize> {
    match kind {
        15 => Some(0),
        1 => Some(1),
        2 => Some(2),
        4 => Some(3),
        _ => None,
    }
}

/// Parsed MSH 2.2 content. Node ids are re-indexed densely in file order;
/// `node_ids[i]` is the file id of node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MshDocument {
    pub version: String,
    pub nodes: Vec<[f64; 3]>,
    pub node_ids: Vec<u64>,
    pub elements: Vec<MshElement>,
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    /// Next non-empty line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), ParseError> {
        let line = self.last + 1;
        self.next()
            .ok_or_else(|| ParseError::Syntax { line, message: format!("unexpected end of input, expected {what}") })
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, message: message.into() }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ParseError> {
    let tok = tok.ok_or_else(|| syntax(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| syntax(line, format!("invalid {what} '{tok}'")))
}

/// Parses an MSH 2.2 ASCII file.
pub fn parse_msh(bytes: &[u8]) -> Result<MshDocument, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        syntax(line, "input is not ASCII text")
    })?;
    let mut lines = Lines::new(text);
    let mut version = None;
    let mut nodes: Option<NodeTable> = None;
    let mut elements = None;

    while let Some((ln, line)) = lines.next() {
        match line {
            "$MeshFormat" => {
                let (l, fmt) = lines.expect("format line")?;
                let mut it = fmt.split_whitespace();
                let v = it.next().unwrap_or("");
                if v != "2.2" {
                    return Err(ParseError::UnsupportedVersion { line: l, version: v.to_string() });
                }
                let file_type: i64 = parse_num(it.next(), l, "file type")?;
                if file_type != 0 {
                    return Err(ParseError::Binary { line: l });
                }
                let _data_size: i64 = parse_num(it.next(), l, "data size")?;
                end_section(&mut lines, "$EndMeshFormat")?;
                version = Some(v.to_string());
            }
            "$Nodes" => {
                if version.is_none() {
                    return Err(ParseError::MissingSection("MeshFormat"));
                }
                nodes = Some(parse_nodes(&mut lines)?);
            }
            "$Elements" => {
                let Some((_, _, index)) = nodes.as_ref() else {
                    return Err(ParseError::MissingSection("Nodes"));
                };
                elements = Some(parse_elements(&mut lines, index)?);
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                let name = &s[1..];
                warn!("skipping unknown MSH section ${name} at line {ln}");
                let end = format!("$End{name}");
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => return Err(syntax(ln, format!("unexpected content '{}'", truncate(other)))),
        }
    }

    let version = version.ok_or(ParseError::MissingSection("MeshFormat"))?;
    let (nodes, node_ids, _) = nodes.ok_or(ParseError::MissingSection("Nodes"))?;
    let elements = elements.ok_or(ParseError::MissingSection("Elements"))?;
    Ok(MshDocument { version, nodes, node_ids, elements })
}

fn truncate(s: &str) -> String {
    s.chars().take(40).collect()
}

fn end_section(lines: &mut Lines, end: &str) -> Result<(), ParseError> {
    let (l, line) = lines.expect(end)?;
    if line != end {
        return Err(syntax(l, format!("expected {end}, found '{}'", truncate(line))));
    }
    Ok(())
}

fn parse_count(lines: &mut Lines, what: &str) -> Result<usize, ParseError> {
    let (l, line) = lines.expect(what)?;
    let mut it = line.split_whitespace();
    let n = parse_num(it.next(), l, what)?;
    if it.next().is_some() {
        return Err(syntax(l, format!("malformed {what}")));
    }
    Ok(n)
}

type NodeTable = (Vec<[f64; 3]>, Vec<u64>, HashMap<u64, usize>);

fn parse_nodes(lines: &mut Lines) -> Result<NodeTable, ParseError> {
    let count = parse_count(lines, "node count")?;
    let cap = count.min(1 << 16);
    let mut coords = Vec::with_capacity(cap);
    let mut ids = Vec::with_capacity(cap);
    let mut index = HashMap::with_capacity(cap);
    for _ in 0..count {
        let (l, line) = lines.expect("node record")?;
        let mut it = line.split_whitespace();
        let id: u64 = parse_num(it.next(), l, "node id")?;
        let mut p = [0.0_f64; 3];
        for (k, x) in p.iter_mut().enumerate() {
            *x = parse_num(it.next(), l, &format!("coordinate {k}"))?;
            if !x.is_finite() {
                return Err(syntax(l, "non-finite coordinate"));
            }
        }
        if it.next().is_some() {
            return Err(syntax(l, "trailing data in node record"));
        }
        if index.insert(id, coords.len()).is_some() {
            return Err(syntax(l, format!("duplicate node id {id}")));
        }
        coords.push(p);
        ids.push(id);
    }
    end_section(lines, "$EndNodes")?;
    Ok((coords, ids, index))
}

fn parse_elements(lines: &mut Lines, index: &HashMap<u64, usize>) -> Result<Vec<MshElement>, ParseError> {
    let count = parse_count(lines, "element count")?;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let (l, line) = lines.expect("element record")?;
        let mut it = line.split_whitespace();
        let id: u64 = parse_num(it.next(), l, "element id")?;
        let kind: u32 = parse_num(it.next(), l, "element type")?;
        let dim = element_dim(kind).ok_or_else(|| syntax(l, format!("unsupported element type {kind}")))?;
        let ntags: usize = parse_num(it.next(), l, "tag count")?;
        if ntags > 64 {
            return Err(syntax(l, format!("implausible tag count {ntags}")));
        }
        let mut tags = Vec::with_capacity(ntags);
        for _ in 0..ntags {
            tags.push(parse_num(it.next(), l, "tag")?);
        }
        let mut nodes = Vec::with_capacity(dim + 1);
        for _ in 0..=dim {
            let node: u64 = parse_num(it.next(), l, "element node")?;
            let &i = index.get(&node).ok_or(ParseError::MissingNode { line: l, element: id, node })?;
            nodes.push(i);
        }
        if it.next().is_some() {
            return Err(syntax(l, "trailing data in element record"));
        }
        out.push(MshElement { id, kind, tags, nodes });
    }
    end_section(lines, "$EndElements")?;
    Ok(out)
}

/// A tagged lower-dimensional element lying on a mesh facet.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetTag {
    pub facet: usize,
    pub tag: i64,
}

/// Mesh assembled from an MSH document.
#[derive(Debug, Clone)]
pub struct MshMesh {
    pub mesh: Mesh,
    pub marker: CompartmentMarker,
    pub facet_tags: Vec<FacetTag>,
    /// File node id of each mesh vertex.
    pub node_ids: Vec<u64>,
}

/// Converts a document into a mesh whose cells are the elements of the
/// highest dimension. Cell markers are the physical tags (0 when untagged);
/// tagged elements one dimension lower become facet tags and must lie on
/// mesh facets. Lower elements are ignored.
pub fn to_mesh(doc: &MshDocument) -> Result<MshMesh, ParseError> {
    let topo = doc.elements.iter().map(MshElement::dim).max().unwrap_or(0);
    if topo == 0 {
        return Err(ParseError::UnsupportedMesh("no line, triangle or tetrahedron elements".into()));
    }

    let mut dense = vec![usize::MAX; doc.nodes.len()];
    let mut vertices = Vec::new();
    let mut node_ids = Vec::new();
    let mut cells = Vec::new();
    let mut markers = Vec::new();
    for e in doc.elements.iter().filter(|e| e.dim() == topo) {
        for &n in &e.nodes {
            if dense[n] == usize::MAX {
                dense[n] = vertices.len();
                vertices.push(doc.nodes[n]);
                node_ids.push(doc.node_ids[n]);
            }
            cells.push(dense[n]);
        }
        let tag = e.physical().unwrap_or(0);
        let tag = u32::try_from(tag)
            .map_err(|_| ParseError::UnsupportedMesh(format!("element {} has negative physical tag {tag}", e.id)))?;
        markers.push(tag);
    }

    let used = |k: usize| vertices.iter().any(|p: &[f64; 3]| p[k] != 0.0);
    let embed = if used(2) {
        3
    } else if used(1) {
        2
    } else {
        1
    }
    .max(topo);
    let mesh = Mesh::new(embed, topo, vertices, cells)?;

    let mut facet_index: HashMap<Vec<usize>, usize> = HashMap::new();
    for f in 0..mesh.n_facets() {
        facet_index.insert(mesh.facet(f).to_vec(), f);
    }
    let mut facet_tags = Vec::new();
    for e in doc.elements.iter().filter(|e| e.dim() + 1 == topo) {
        let Some(tag) = e.physical() else { continue };
        let mut key: Vec<usize> = e.nodes.iter().map(|&n| dense[n]).collect();
        if key.contains(&usize::MAX) {
            return Err(ParseError::UnsupportedMesh(format!(
                "element {} of dimension {} is not attached to any cell",
                e.id,
                e.dim()
            )));
        }
        key.sort_unstable();
        let facet = *facet_index.get(&key).ok_or_else(|| {
            ParseError::UnsupportedMesh(format!("element {} is not a facet of the {topo}D cells", e.id))
        })?;
        facet_tags.push(FacetTag { facet, tag });
    }

    Ok(MshMesh { marker: CompartmentMarker(markers), mesh, facet_tags, node_ids })
}

/// Writes a mesh (and optional markers) in the native text format.
pub fn write_native<W: Write>(mesh: &Mesh, marker: Option<&CompartmentMarker>, mut w: W) -> io::Result<()> {
    writeln!(w, "btmesh 1 {} {} {} {}", mesh.embed_dim(), mesh.topo_dim(), mesh.n_vertices(), mesh.n_cells())?;
    for v in mesh.vertices() {
        let coords: Vec<String> = v[..mesh.embed_dim()].iter().map(|x| format!("{x:?}")).collect();
        writeln!(w, "{}", coords.join(" "))?;
    }
    for c in 0..mesh.n_cells() {
        let ids: Vec<String> = mesh.cell(c).iter().map(usize::to_string).collect();
        writeln!(w, "{}", ids.join(" "))?;
    }
    if let Some(m) = marker {
        writeln!(w, "markers")?;
        for v in m.values() {
            writeln!(w, "{v}")?;
        }
    }
    Ok(())
}

pub fn to_native_string(mesh: &Mesh, marker: Option<&CompartmentMarker>) -> String {
    let mut out = Vec::new();
    write_native(mesh, marker, &mut out).expect("writing to memory cannot fail");
    String::from_utf8(out).expect("native format is ASCII")
}

/// Line reader that reports byte offsets.
struct OffsetLines<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> OffsetLines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        while self.pos < self.text.len() {
            let start = self.pos;
            let rest = &self.text[start..];
            let len = rest.find('\n').map_or(rest.len(), |i| i + 1);
            self.pos += len;
            let line = rest[..len].trim();
            if !line.is_empty() {
                return Some((start, line));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), ParseError> {
        let end = self.text.len();
        self.next().ok_or_else(|| native(end, format!("unexpected end of file, expected {what}")))
    }
}

fn native(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError::Native { offset, message: message.into() }
}

fn native_num<T: std::str::FromStr>(tok: Option<&str>, offset: usize, what: &str) -> Result<T, ParseError> {
    let tok = tok.ok_or_else(|| native(offset, format!("missing {what}")))?;
    tok.parse().map_err(|_| native(offset, format!("invalid {what} '{}'", truncate(tok))))
}

/// Reads the native format written by [`write_native`].
pub fn read_native(bytes: &[u8]) -> Result<(Mesh, Option<CompartmentMarker>), ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| native(e.valid_up_to(), "input is not ASCII text"))?;
    let mut lines = OffsetLines { text, pos: 0 };
    let (off, header) = lines.expect("header")?;
    let mut it = header.split_whitespace();
    if it.next() != Some("btmesh") || it.next() != Some("1") {
        return Err(native(off, "header must start with 'btmesh 1'"));
    }
    let embed: usize = native_num(it.next(), off, "embedding dimension")?;
    let topo: usize = native_num(it.next(), off, "topological dimension")?;
    let nv: usize = native_num(it.next(), off, "vertex count")?;
    let nc: usize = native_num(it.next(), off, "cell count")?;
    if it.next().is_some() || !(1..=3).contains(&embed) || !(1..=3).contains(&topo) || topo > embed {
        return Err(native(off, "malformed header"));
    }

    let mut vertices = Vec::with_capacity(nv.min(1 << 16));
    for _ in 0..nv {
        let (o, line) = lines.expect("vertex")?;
        let mut it = line.split_whitespace();
        let mut p = [0.0; 3];
        for x in p.iter_mut().take(embed) {
            *x = native_num(it.next(), o, "coordinate")?;
        }
        if it.next().is_some() {
            return Err(native(o, "too many coordinates"));
        }
        vertices.push(p);
    }
    let mut cells = Vec::with_capacity(nc.min(1 << 16) * (topo + 1));
    for _ in 0..nc {
        let (o, line) = lines.expect("cell")?;
        let mut it = line.split_whitespace();
        for _ in 0..=topo {
            cells.push(native_num(it.next(), o, "vertex index")?);
        }
        if it.next().is_some() {
            return Err(native(o, "too many vertex indices"));
        }
    }
    let marker = match lines.next() {
        None => None,
        Some((_, "markers")) => {
            let mut values = Vec::with_capacity(nc.min(1 << 16));
            for _ in 0..nc {
                let (o, line) = lines.expect("marker")?;
                values.push(native_num(Some(line), o, "marker")?);
            }
            if let Some((o2, _)) = lines.next() {
                return Err(native(o2, "trailing content after markers"));
            }
            Some(CompartmentMarker(values))
        }
        Some((o, _)) => return Err(native(o, "expected 'markers' or end of file")),
    };
    let mesh = Mesh::new(embed, topo, vertices, cells)?;
    Ok((mesh, marker))
}
