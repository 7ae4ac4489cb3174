//! Gmsh MSH 2.2 ASCII reader and writer (2-node lines and 3-node triangles).

use std::collections::HashMap;
use std::io::Write;

use super::{BoundaryEdge, BoundaryTag, Point2, TriMesh};
use crate::error::{Error, Result};

/// Maps physical-group ids of boundary lines onto boundary tags.
#[derive(Debug, Clone)]
pub struct TagDictionary {
    map: HashMap<i64, BoundaryTag>,
}

impl Default for TagDictionary {
    /// The inverse of [`BoundaryTag::code`].
    fn default() -> Self {
        Self {
            map: BoundaryTag::ALL.iter().map(|&t| (t.code(), t)).collect(),
        }
    }
}

impl TagDictionary {
    pub fn new(entries: impl IntoIterator<Item = (i64, BoundaryTag)>) -> Self {
        Self {
            map: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, id: i64) -> Option<BoundaryTag> {
        self.map.get(&id).copied()
    }

    fn code_of(&self, tag: BoundaryTag) -> i64 {
        self.map
            .iter()
            .filter(|(_, &t)| t == tag)
            .map(|(&id, _)| id)
            .min()
            .unwrap_or_else(|| tag.code())
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.inner.next() {
                Some((i, l)) => {
                    self.last = i + 1;
                    let l = l.trim();
                    if !l.is_empty() {
                        return Ok((i + 1, l));
                    }
                }
                None => {
                    return Err(Error::Parse {
                        line: self.last + 1,
                        msg: "unexpected end of file".into(),
                    })
                }
            }
        }
    }

    fn expect(&mut self, header: &str) -> Result<()> {
        let (n, l) = self.next()?;
        if l != header {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected section header {header}, found {l:?}"),
            });
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse {
        line,
        msg: format!("malformed {what}"),
    })
}

/// Parses MSH 2.2 ASCII text. Physical ids of boundary lines are mapped
/// through `tags`; clockwise triangles are reoriented.
pub fn parse_msh(text: &str, tags: &TagDictionary) -> Result<TriMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    lines.expect("$MeshFormat")?;
    let (n, fmt) = lines.next()?;
    let version = fmt.split_whitespace().next().unwrap_or("");
    if !version.starts_with("2.") {
        return Err(Error::Parse {
            line: n,
            msg: format!("unsupported MSH version {version:?}"),
        });
    }
    if fmt.split_whitespace().nth(1) != Some("0") {
        return Err(Error::Parse {
            line: n,
            msg: "only ASCII MSH files are supported".into(),
        });
    }
    lines.expect("$EndMeshFormat")?;

    // skip optional sections such as $PhysicalNames
    let mut header = lines.next()?;
    while header.1 != "$Nodes" {
        if !header.1.starts_with('$') || header.1.starts_with("$End") {
            return Err(Error::Parse {
                line: header.0,
                msg: format!("expected section header $Nodes, found {:?}", header.1),
            });
        }
        let end = format!("$End{}", &header.1[1..]);
        loop {
            let (_, l) = lines.next()?;
            if l == end {
                break;
            }
        }
        header = lines.next()?;
    }

    let (n, l) = lines.next()?;
    let count: usize = parse_num(Some(l), n, "node count")?;
    let mut ids = HashMap::with_capacity(count);
    let mut nodes = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, l) = lines.next()?;
        let mut it = l.split_whitespace();
        let id: i64 = parse_num(it.next(), n, "node id")?;
        let x: f64 = parse_num(it.next(), n, "node coordinate")?;
        let y: f64 = parse_num(it.next(), n, "node coordinate")?;
        if ids.insert(id, nodes.len()).is_some() {
            return Err(Error::Parse {
                line: n,
                msg: format!("duplicate node id {id}"),
            });
        }
        nodes.push(Point2::new(x, y));
    }
    lines.expect("$EndNodes")?;
    lines.expect("$Elements")?;

    let (n, l) = lines.next()?;
    let count: usize = parse_num(Some(l), n, "element count")?;
    let mut cells = Vec::new();
    let mut boundary = Vec::new();
    for _ in 0..count {
        let (n, l) = lines.next()?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let ty: u32 = parse_num(toks.get(1).copied(), n, "element type")?;
        let ntags: usize = parse_num(toks.get(2).copied(), n, "tag count")?;
        let nn = match ty {
            1 => 2,
            2 => 3,
            _ => {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("unsupported element type {ty}"),
                })
            }
        };
        if toks.len() != 3 + ntags + nn {
            return Err(Error::Parse {
                line: n,
                msg: "wrong number of entries in element record".into(),
            });
        }
        let mut verts = [0usize; 3];
        for (j, tok) in toks[3 + ntags..].iter().enumerate() {
            let id: i64 = parse_num(Some(tok), n, "node reference")?;
            verts[j] = *ids.get(&id).ok_or_else(|| Error::Parse {
                line: n,
                msg: format!("dangling node reference {id}"),
            })?;
        }
        match ty {
            1 => {
                let phys: i64 = if ntags > 0 {
                    parse_num(Some(toks[3]), n, "physical tag")?
                } else {
                    return Err(Error::Parse {
                        line: n,
                        msg: "boundary line without physical tag".into(),
                    });
                };
                let tag = tags.get(phys).ok_or_else(|| Error::Parse {
                    line: n,
                    msg: format!("physical tag {phys} is not in the tag dictionary"),
                })?;
                boundary.push(BoundaryEdge {
                    nodes: [verts[0], verts[1]],
                    tag,
                });
            }
            _ => cells.push(verts),
        }
    }
    lines.expect("$EndElements")?;
    TriMesh::new(nodes, cells, boundary)
}

/// Writes MSH 2.2 ASCII with 17 significant digits per coordinate.
pub fn write_msh<W: Write>(mesh: &TriMesh, tags: &TagDictionary, out: &mut W) -> Result<()> {
    writeln!(out, "$MeshFormat\n2.2 0 8\n$EndMeshFormat")?;
    writeln!(out, "$Nodes\n{}", mesh.num_nodes())?;
    for (i, p) in mesh.nodes().iter().enumerate() {
        writeln!(out, "{} {:.16e} {:.16e} 0", i + 1, p.x, p.y)?;
    }
    writeln!(out, "$EndNodes")?;
    writeln!(
        out,
        "$Elements\n{}",
        mesh.boundary_edges().len() + mesh.num_cells()
    )?;
    let mut id = 1;
    for e in mesh.boundary_edges() {
        let code = tags.code_of(e.tag);
        writeln!(out, "{id} 1 2 {code} {code} {} {}", e.nodes[0] + 1, e.nodes[1] + 1)?;
        id += 1;
    }
    for c in mesh.cells() {
        writeln!(out, "{id} 2 2 0 1 {} {} {}", c[0] + 1, c[1] + 1, c[2] + 1)?;
        id += 1;
    }
    writeln!(out, "$EndElements")?;
    Ok(())
}
