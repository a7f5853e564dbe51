/*
Copyright 2026 The softhand Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! Triangle meshes: STL/OBJ loading, validation and a minimal OBJ writer.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read mesh {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse mesh {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(PathBuf),
    #[error("mesh has no triangles")]
    Empty,
    #[error("mesh has a non-finite vertex coordinate at index {0}")]
    NonFinite(usize),
    #[error("triangle {triangle} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { triangle: usize, index: u32, count: usize },
}

/// Indexed triangle mesh. Vertices are in meters in the owner's local frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let mesh = Self { vertices, triangles };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        if let Some(i) = self.vertices.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(MeshError::NonFinite(i));
        }
        let count = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i as usize >= count) {
                return Err(MeshError::IndexOutOfRange { triangle: t, index, count });
            }
        }
        Ok(())
    }

    pub fn vertex(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.vertices[i])
    }

    /// Area-weighted vertex normals. Isolated vertices get a zero normal.
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for tri in &self.triangles {
            let [a, b, c] = tri.map(|i| self.vertex(i as usize));
            // cross product length is twice the area, which is the weighting we want
            let n = (b - a).cross(&(c - a));
            for &i in tri {
                normals[i as usize] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    pub fn bounding_box(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let mut it = self.vertices.iter().map(|v| Vector3::from(*v));
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.inf(&v), hi.sup(&v))))
    }

    /// Appends `other`, re-indexing its triangles.
    pub fn merge(&mut self, other: &TriMesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + offset)));
    }

    pub fn write_obj<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(out, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }
}

/// Loads an STL (binary or ASCII) or OBJ file, chosen by extension.
pub fn load_mesh(path: &Path) -> Result<TriMesh, MeshError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let io_err = |source| MeshError::Io { path: path.to_path_buf(), source };
    let mesh = match ext.as_str() {
        "stl" => {
            let mut reader = BufReader::new(File::open(path).map_err(io_err)?);
            let indexed = stl_io::read_stl(&mut reader).map_err(|e| MeshError::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            TriMesh {
                vertices: indexed
                    .vertices
                    .iter()
                    .map(|v| [v[0] as f64, v[1] as f64, v[2] as f64])
                    .collect(),
                triangles: indexed
                    .faces
                    .iter()
                    .map(|f| f.vertices.map(|i| i as u32))
                    .collect(),
            }
        }
        "obj" => {
            if !path.exists() {
                return Err(io_err(std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
            let (models, _) = tobj::load_obj(path, &tobj::GPU_LOAD_OPTIONS).map_err(|e| {
                MeshError::Parse { path: path.to_path_buf(), message: e.to_string() }
            })?;
            let mut mesh = TriMesh::default();
            for model in models {
                let part = TriMesh {
                    vertices: model
                        .mesh
                        .positions
                        .chunks_exact(3)
                        .map(|c| [c[0], c[1], c[2]])
                        .collect(),
                    triangles: model
                        .mesh
                        .indices
                        .chunks_exact(3)
                        .map(|c| [c[0], c[1], c[2]])
                        .collect(),
                };
                mesh.merge(&part);
            }
            mesh
        }
        _ => return Err(MeshError::UnsupportedFormat(path.to_path_buf())),
    };
    mesh.validate()?;
    Ok(mesh)
}
