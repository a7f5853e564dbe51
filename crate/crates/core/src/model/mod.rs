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
//! The hand model: a kinematic tree of links and single-axis joints with
//! contact patches attached to links.
//!
//! A [`HandModel`] is validated on construction and never mutated afterwards;
//! edits such as [`HandModel::apply_joint_edit`] return a new model.

mod patch;
mod urdf;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Vector3;
use thiserror::Error;

use crate::mesh::{load_mesh, MeshError, TriMesh};
use crate::transform::RigidTransform;

pub use patch::{ContactPatch, PatchOwner, PatchSidecar};
pub use urdf::{parse_urdf, serialize_urdf};

/// Default revolute range when a URDF joint carries no `<limit>`: a crease
/// flexes one way, up to a right angle.
pub const DEFAULT_REVOLUTE_LIMITS: [f64; 2] = [0.0, std::f64::consts::FRAC_PI_2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("invalid URDF: {0}")]
    InvalidUrdf(String),
    #[error("joint {joint} has unsupported kind {kind:?} (only revolute and fixed are supported)")]
    UnsupportedJointKind { joint: String, kind: String },
    #[error("kinematic cycle through links {}", .0.join(" -> "))]
    KinematicCycle(Vec<String>),
    #[error("duplicate name {0}")]
    DuplicateName(String),
    #[error("joint references missing link {0}")]
    MissingLink(String),
    #[error("joint {0} has a zero or non-finite axis")]
    NonUnitAxis(String),
    #[error("link {0} has more than one parent joint")]
    MultipleParents(String),
    #[error("model has several root links: {}", .0.join(", "))]
    MultipleRoots(Vec<String>),
    #[error("model has no links")]
    Empty,
    #[error("joint {joint} has invalid limits [{lower}, {upper}]")]
    InvalidLimits { joint: String, lower: f64, upper: f64 },
    #[error("mesh for link {link} declares non-meter units (scale {scale:?})")]
    UnsupportedMeshUnits { link: String, scale: [f64; 3] },
    #[error("mesh {path} for link {link} could not be resolved")]
    MissingMesh { link: String, path: PathBuf },
    #[error("mesh for link {link}: {message}")]
    Mesh { link: String, message: String },
    #[error("unknown joint {0}")]
    UnknownJoint(String),
    #[error("unknown link {0}")]
    UnknownLink(String),
    #[error("unknown patch owner {0}")]
    UnknownOwner(String),
    #[error("invalid contact patch {id}: {reason}")]
    InvalidPatch { id: String, reason: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl ModelError {
    /// Stable machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::MalformedXml(_) => "MalformedXml",
            ModelError::InvalidUrdf(_) => "InvalidUrdf",
            ModelError::UnsupportedJointKind { .. } => "UnsupportedJointKind",
            ModelError::KinematicCycle(_) => "KinematicCycle",
            ModelError::DuplicateName(_) => "DuplicateName",
            ModelError::MissingLink(_) => "MissingLink",
            ModelError::NonUnitAxis(_) => "NonUnitAxis",
            ModelError::MultipleParents(_) => "MultipleParents",
            ModelError::MultipleRoots(_) => "MultipleRoots",
            ModelError::Empty => "Empty",
            ModelError::InvalidLimits { .. } => "InvalidLimits",
            ModelError::UnsupportedMeshUnits { .. } => "UnsupportedMeshUnits",
            ModelError::MissingMesh { .. } => "MissingMesh",
            ModelError::Mesh { .. } => "Mesh",
            ModelError::UnknownJoint(_) => "UnknownJoint",
            ModelError::UnknownLink(_) => "UnknownLink",
            ModelError::UnknownOwner(_) => "UnknownOwner",
            ModelError::InvalidPatch { .. } => "InvalidPatch",
            ModelError::Io { .. } => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Child frame relative to the parent frame at zero angle.
    pub origin: RigidTransform,
    /// Rotation axis in the joint frame. Unit length for revolute joints.
    pub axis: Vector3<f64>,
    /// `[lower, upper]` in radians; `[0, 0]` for fixed joints.
    pub limits: [f64; 2],
}

impl Joint {
    pub fn revolute(
        name: impl Into<String>,
        parent: impl Into<String>,
        child: impl Into<String>,
        origin: RigidTransform,
        axis: Vector3<f64>,
        limits: [f64; 2],
    ) -> Self {
        Self {
            name: name.into(),
            kind: JointKind::Revolute,
            parent: parent.into(),
            child: child.into(),
            origin,
            axis,
            limits,
        }
    }

    pub fn fixed(
        name: impl Into<String>,
        parent: impl Into<String>,
        child: impl Into<String>,
        origin: RigidTransform,
    ) -> Self {
        Self {
            name: name.into(),
            kind: JointKind::Fixed,
            parent: parent.into(),
            child: child.into(),
            origin,
            axis: Vector3::x(),
            limits: [0.0, 0.0],
        }
    }

    pub fn is_revolute(&self) -> bool {
        self.kind == JointKind::Revolute
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// `mesh` is filled in once the file has been resolved from disk.
    Mesh { filename: String, mesh: Option<Arc<TriMesh>> },
    Box { size: [f64; 3] },
    Cylinder { radius: f64, length: f64 },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Visual {
    pub origin: RigidTransform,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub visual: Option<Visual>,
    /// Ids of the contact patches owned by this link, ascending.
    pub patches: Vec<String>,
}

impl Link {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), visual: None, patches: Vec::new() }
    }

    pub fn with_visual(mut self, origin: RigidTransform, geometry: Geometry) -> Self {
        self.visual = Some(Visual { origin, geometry });
        self
    }
}

/// A validated kinematic tree.
#[derive(Debug, Clone)]
pub struct HandModel {
    name: String,
    root: usize,
    links: Vec<Link>,
    joints: Vec<Joint>,
    patches: BTreeMap<String, ContactPatch>,
    warnings: Vec<String>,
    link_index: BTreeMap<String, usize>,
    joint_index: BTreeMap<String, usize>,
    parent_joint: Vec<Option<usize>>,
    /// Joint indices with every parent joint before its children.
    topo_order: Vec<usize>,
}

impl HandModel {
    /// Validates and assembles a model. Non-unit revolute axes are normalized
    /// and recorded in [`HandModel::warnings`].
    pub fn from_parts(
        name: impl Into<String>,
        links: Vec<Link>,
        joints: Vec<Joint>,
        patches: Vec<ContactPatch>,
    ) -> Result<Self, ModelError> {
        Self::assemble(name.into(), links, joints, patches, Vec::new())
    }

    fn assemble(
        name: String,
        mut links: Vec<Link>,
        mut joints: Vec<Joint>,
        patch_list: Vec<ContactPatch>,
        mut warnings: Vec<String>,
    ) -> Result<Self, ModelError> {
        if links.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut link_index = BTreeMap::new();
        for (i, link) in links.iter().enumerate() {
            if link_index.insert(link.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateName(link.name.clone()));
            }
        }
        let mut joint_index = BTreeMap::new();
        for (i, joint) in joints.iter().enumerate() {
            if joint_index.insert(joint.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateName(joint.name.clone()));
            }
        }
        for joint in &mut joints {
            for end in [&joint.parent, &joint.child] {
                if !link_index.contains_key(end) {
                    return Err(ModelError::MissingLink(end.clone()));
                }
            }
            normalize_joint(joint, &mut warnings)?;
        }

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (j, joint) in joints.iter().enumerate() {
            children[link_index[&joint.parent]].push(j);
        }
        if let Some(cycle) = find_cycle(&links, &joints, &children, &link_index) {
            return Err(ModelError::KinematicCycle(cycle));
        }

        let mut parent_joint = vec![None; links.len()];
        for (j, joint) in joints.iter().enumerate() {
            let c = link_index[&joint.child];
            if parent_joint[c].replace(j).is_some() {
                return Err(ModelError::MultipleParents(joint.child.clone()));
            }
        }
        let roots: Vec<usize> = (0..links.len()).filter(|&i| parent_joint[i].is_none()).collect();
        if roots.len() != 1 {
            // without cycles a forest always has at least one root
            return Err(ModelError::MultipleRoots(
                roots.iter().map(|&i| links[i].name.clone()).collect(),
            ));
        }
        let root = roots[0];

        let mut topo_order = Vec::with_capacity(joints.len());
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(l) = queue.pop_front() {
            for &j in &children[l] {
                topo_order.push(j);
                queue.push_back(link_index[&joints[j].child]);
            }
        }

        let mut patches = BTreeMap::new();
        for patch in patch_list {
            patch.validate()?;
            if let PatchOwner::Link(owner) = &patch.owner {
                if !link_index.contains_key(owner) {
                    return Err(ModelError::UnknownOwner(owner.clone()));
                }
            }
            if patches.contains_key(&patch.id) {
                return Err(ModelError::DuplicateName(patch.id.clone()));
            }
            patches.insert(patch.id.clone(), patch);
        }
        for link in &mut links {
            link.patches = patches
                .values()
                .filter(|p| p.owner.link() == Some(link.name.as_str()))
                .map(|p| p.id.clone())
                .collect();
            if let Some(Visual { geometry: Geometry::Mesh { mesh: Some(mesh), .. }, .. }) =
                &link.visual
            {
                mesh.validate().map_err(|e| ModelError::Mesh {
                    link: link.name.clone(),
                    message: e.to_string(),
                })?;
            }
        }

        Ok(Self {
            name,
            root,
            links,
            joints,
            patches,
            warnings,
            link_index,
            joint_index,
            parent_joint,
            topo_order,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> &str {
        &self.links[self.root].name
    }

    pub fn root_index(&self) -> usize {
        self.root
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn link(&self, name: &str) -> Option<&Link> {
        self.link_index.get(name).map(|&i| &self.links[i])
    }

    pub fn joint(&self, name: &str) -> Option<&Joint> {
        self.joint_index.get(name).map(|&i| &self.joints[i])
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.link_index.get(name).copied()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_index.get(name).copied()
    }

    /// Index of the joint whose child is link `link`; `None` for the root.
    pub fn parent_joint_of(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    pub fn topological_joints(&self) -> &[usize] {
        &self.topo_order
    }

    /// Revolute joint names in declaration order.
    pub fn revolute_joints(&self) -> impl Iterator<Item = &Joint> {
        self.joints.iter().filter(|j| j.is_revolute())
    }

    /// Joint indices from the root down to `link`, root side first.
    pub fn joint_path(&self, link: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut current = link;
        while let Some(j) = self.parent_joint[current] {
            path.push(j);
            current = self.link_index[&self.joints[j].parent];
        }
        path.reverse();
        path
    }

    pub fn patches(&self) -> impl Iterator<Item = &ContactPatch> {
        self.patches.values()
    }

    pub fn patch(&self, id: &str) -> Option<&ContactPatch> {
        self.patches.get(id)
    }

    /// Warnings recorded while constructing the model (e.g. normalized axes).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// New model whose joint `joint` has origin `delta ∘ origin`: the edit
    /// acts in the parent link's frame.
    pub fn apply_joint_edit(
        &self,
        joint: &str,
        delta: &RigidTransform,
    ) -> Result<HandModel, ModelError> {
        let idx = self.joint_index(joint).ok_or_else(|| ModelError::UnknownJoint(joint.into()))?;
        let mut edited = self.clone();
        edited.joints[idx].origin = delta.compose(&self.joints[idx].origin);
        Ok(edited)
    }

    /// Registers `patch`, replacing any patch with the same id.
    pub fn attach_patch(&self, patch: ContactPatch) -> Result<HandModel, ModelError> {
        patch.validate()?;
        if let PatchOwner::Link(owner) = &patch.owner {
            if !self.link_index.contains_key(owner) {
                return Err(ModelError::UnknownOwner(owner.clone()));
            }
        }
        let mut patches = self.patches.clone();
        patches.insert(patch.id.clone(), patch);
        let mut out = self.clone();
        out.patches = patches;
        for link in &mut out.links {
            link.patches = out
                .patches
                .values()
                .filter(|p| p.owner.link() == Some(link.name.as_str()))
                .map(|p| p.id.clone())
                .collect();
        }
        Ok(out)
    }

    /// Loads every mesh reference relative to `base_dir`.
    pub fn resolve_meshes(&self, base_dir: &Path) -> Result<HandModel, ModelError> {
        let mut out = self.clone();
        for link in &mut out.links {
            let Some(Visual { geometry: Geometry::Mesh { filename, mesh }, .. }) = &mut link.visual
            else {
                continue;
            };
            let path = resolve_mesh_path(base_dir, filename);
            let loaded = match load_mesh(&path) {
                Ok(m) => m,
                Err(MeshError::Io { .. }) => {
                    return Err(ModelError::MissingMesh { link: link.name.clone(), path })
                }
                Err(e) => {
                    return Err(ModelError::Mesh { link: link.name.clone(), message: e.to_string() })
                }
            };
            *mesh = Some(Arc::new(loaded));
        }
        Ok(out)
    }

    /// Mesh references that do not resolve to an existing file.
    pub fn unresolved_meshes(&self, base_dir: &Path) -> Vec<PathBuf> {
        self.links
            .iter()
            .filter_map(|l| match &l.visual {
                Some(Visual { geometry: Geometry::Mesh { filename, .. }, .. }) => {
                    let p = resolve_mesh_path(base_dir, filename);
                    (!p.is_file()).then_some(p)
                }
                _ => None,
            })
            .collect()
    }

    /// Field-by-field comparison with numeric tolerance `tol`. Loaded mesh
    /// data and warnings are ignored. Returns the first difference found.
    pub fn semantic_diff(&self, other: &HandModel, tol: f64) -> Option<String> {
        if self.name != other.name {
            return Some(format!("robot name {:?} vs {:?}", self.name, other.name));
        }
        if self.root() != other.root() {
            return Some(format!("root {} vs {}", self.root(), other.root()));
        }
        let names = |m: &HandModel| m.link_index.keys().cloned().collect::<BTreeSet<_>>();
        if names(self) != names(other) {
            return Some("link name sets differ".into());
        }
        for link in &self.links {
            let o = other.link(&link.name).expect("same names");
            if let Some(d) = visual_diff(&link.visual, &o.visual, tol) {
                return Some(format!("link {}: {d}", link.name));
            }
            if link.patches != o.patches {
                return Some(format!("link {}: patch lists differ", link.name));
            }
        }
        if self.joints.len() != other.joints.len() {
            return Some("joint counts differ".into());
        }
        for joint in &self.joints {
            let Some(o) = other.joint(&joint.name) else {
                return Some(format!("joint {} missing", joint.name));
            };
            if joint.kind != o.kind || joint.parent != o.parent || joint.child != o.child {
                return Some(format!("joint {}: kind or topology differs", joint.name));
            }
            if !joint.origin.approx_eq(&o.origin, tol) {
                return Some(format!("joint {}: origin differs", joint.name));
            }
            if joint.is_revolute() {
                if (joint.axis - o.axis).amax() > tol {
                    return Some(format!("joint {}: axis differs", joint.name));
                }
                if (joint.limits[0] - o.limits[0]).abs() > tol
                    || (joint.limits[1] - o.limits[1]).abs() > tol
                {
                    return Some(format!("joint {}: limits differ", joint.name));
                }
            }
        }
        if self.patches.len() != other.patches.len() {
            return Some("patch counts differ".into());
        }
        for (id, p) in &self.patches {
            let Some(q) = other.patches.get(id) else {
                return Some(format!("patch {id} missing"));
            };
            if p.owner != q.owner || p.label != q.label || p.points.len() != q.points.len() {
                return Some(format!("patch {id}: header differs"));
            }
            let close = |a: &[Vector3<f64>], b: &[Vector3<f64>]| {
                a.iter().zip(b).all(|(x, y)| (x - y).amax() <= tol)
            };
            if !close(&p.points, &q.points) {
                return Some(format!("patch {id}: points differ"));
            }
            match (&p.normals, &q.normals) {
                (None, None) => {}
                (Some(a), Some(b)) if close(a, b) => {}
                _ => return Some(format!("patch {id}: normals differ")),
            }
        }
        None
    }

    pub fn semantically_eq(&self, other: &HandModel, tol: f64) -> bool {
        self.semantic_diff(other, tol).is_none()
    }
}

/// Reads a URDF file, resolves its meshes and merges the patch sidecar
/// (`<stem>.patches.json` next to the URDF) when one exists.
pub fn load_urdf(path: &Path) -> Result<HandModel, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    let mut model = parse_urdf(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    model = model.resolve_meshes(base)?;
    let sidecar = sidecar_path(path);
    if sidecar.is_file() {
        for patch in PatchSidecar::load(&sidecar)?.patches {
            model = model.attach_patch(patch)?;
        }
    }
    Ok(model)
}

/// `hand.urdf` → `hand.patches.json`.
pub fn sidecar_path(urdf: &Path) -> PathBuf {
    urdf.with_extension("patches.json")
}

fn resolve_mesh_path(base_dir: &Path, filename: &str) -> PathBuf {
    let stripped = filename.strip_prefix("file://").unwrap_or(filename);
    let p = Path::new(stripped);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

fn normalize_joint(joint: &mut Joint, warnings: &mut Vec<String>) -> Result<(), ModelError> {
    if !joint.is_revolute() {
        return Ok(());
    }
    let norm = joint.axis.norm();
    if !norm.is_finite() || norm < 1e-12 {
        return Err(ModelError::NonUnitAxis(joint.name.clone()));
    }
    if (norm - 1.0).abs() > 1e-9 {
        let msg = format!("joint {}: axis {:?} normalized (norm {norm})", joint.name, joint.axis);
        log::warn!("{msg}");
        warnings.push(msg);
        joint.axis /= norm;
    }
    let [lo, hi] = joint.limits;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(ModelError::InvalidLimits { joint: joint.name.clone(), lower: lo, upper: hi });
    }
    Ok(())
}

/// Depth-first search for a directed cycle; returns its link names.
fn find_cycle(
    links: &[Link],
    joints: &[Joint],
    children: &[Vec<usize>],
    link_index: &BTreeMap<String, usize>,
) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; links.len()];
    for start in 0..links.len() {
        if mark[start] != Mark::New {
            continue;
        }
        // (link, next child cursor)
        let mut stack = vec![(start, 0usize)];
        mark[start] = Mark::Active;
        while let Some(&mut (link, ref mut cursor)) = stack.last_mut() {
            if let Some(&j) = children[link].get(*cursor) {
                *cursor += 1;
                let c = link_index[&joints[j].child];
                match mark[c] {
                    Mark::New => {
                        mark[c] = Mark::Active;
                        stack.push((c, 0));
                    }
                    Mark::Active => {
                        let from = stack.iter().position(|&(l, _)| l == c).unwrap();
                        let mut cycle: Vec<String> =
                            stack[from..].iter().map(|&(l, _)| links[l].name.clone()).collect();
                        cycle.push(links[c].name.clone());
                        return Some(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[link] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

fn visual_diff(a: &Option<Visual>, b: &Option<Visual>, tol: f64) -> Option<String> {
    let (a, b) = match (a, b) {
        (None, None) => return None,
        (Some(a), Some(b)) => (a, b),
        _ => return Some("visual presence differs".into()),
    };
    if !a.origin.approx_eq(&b.origin, tol) {
        return Some("visual origin differs".into());
    }
    let close = |x: f64, y: f64| (x - y).abs() <= tol;
    let same = match (&a.geometry, &b.geometry) {
        (Geometry::Mesh { filename: f, .. }, Geometry::Mesh { filename: g, .. }) => f == g,
        (Geometry::Box { size: s }, Geometry::Box { size: t }) => {
            s.iter().zip(t).all(|(x, y)| close(*x, *y))
        }
        (
            Geometry::Cylinder { radius: r, length: l },
            Geometry::Cylinder { radius: q, length: m },
        ) => close(*r, *q) && close(*l, *m),
        (Geometry::Sphere { radius: r }, Geometry::Sphere { radius: q }) => close(*r, *q),
        _ => false,
    };
    (!same).then(|| "geometry differs".into())
}
