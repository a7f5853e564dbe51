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
//! URDF 1.0 reading and writing for the revolute/fixed subset.
//!
//! Contact patches are written as `<contact_patch>` elements directly under
//! `<robot>`. Standard URDF consumers skip unknown elements, so the output
//! stays loadable by ordinary tooling.

use std::fmt::Write as _;

use nalgebra::Vector3;
use roxmltree::{Document, Node};

use super::{
    ContactPatch, Geometry, HandModel, Joint, JointKind, Link, ModelError, PatchOwner, Visual,
    DEFAULT_REVOLUTE_LIMITS,
};
use crate::transform::RigidTransform;

pub fn parse_urdf(text: &str) -> Result<HandModel, ModelError> {
    let doc = Document::parse(text).map_err(|e| ModelError::MalformedXml(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(ModelError::InvalidUrdf(format!(
            "root element is <{}>, expected <robot>",
            robot.tag_name().name()
        )));
    }
    let name = robot.attribute("name").unwrap_or_default().to_string();
    let mut links = Vec::new();
    let mut joints = Vec::new();
    let mut patches = Vec::new();
    for node in robot.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "link" => links.push(parse_link(node)?),
            "joint" => joints.push(parse_joint(node)?),
            "contact_patch" => patches.push(parse_patch(node)?),
            // materials, transmissions, gazebo blocks
            _ => {}
        }
    }
    HandModel::assemble(name, links, joints, patches, Vec::new())
}

fn required<'a>(node: Node<'a, '_>, attr: &str) -> Result<&'a str, ModelError> {
    node.attribute(attr).ok_or_else(|| {
        ModelError::InvalidUrdf(format!("<{}> is missing attribute {attr:?}", node.tag_name().name()))
    })
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == tag)
}

fn numbers<const N: usize>(node: Node, attr: &str, text: &str) -> Result<[f64; N], ModelError> {
    let bad = || {
        ModelError::InvalidUrdf(format!(
            "<{}> attribute {attr}={text:?} is not {N} numbers",
            node.tag_name().name()
        ))
    };
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let arr: [f64; N] = values.try_into().map_err(|_| bad())?;
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(arr)
}

fn number(node: Node, attr: &str) -> Result<Option<f64>, ModelError> {
    node.attribute(attr)
        .map(|t| numbers::<1>(node, attr, t).map(|[v]| v))
        .transpose()
}

fn parse_origin(parent: Node) -> Result<RigidTransform, ModelError> {
    let Some(origin) = child(parent, "origin") else {
        return Ok(RigidTransform::identity());
    };
    let xyz = origin.attribute("xyz").map(|t| numbers(origin, "xyz", t)).transpose()?;
    let rpy = origin.attribute("rpy").map(|t| numbers(origin, "rpy", t)).transpose()?;
    Ok(RigidTransform::from_xyz_rpy(xyz.unwrap_or([0.0; 3]), rpy.unwrap_or([0.0; 3])))
}

fn parse_link(node: Node) -> Result<Link, ModelError> {
    let name = required(node, "name")?.to_string();
    // visual wins; collision geometry is only a fallback
    let source = child(node, "visual").or_else(|| child(node, "collision"));
    let visual = match source {
        Some(v) => parse_visual(&name, v)?,
        None => None,
    };
    Ok(Link { name, visual, patches: Vec::new() })
}

fn parse_visual(link: &str, node: Node) -> Result<Option<Visual>, ModelError> {
    let Some(geometry) = child(node, "geometry") else {
        return Ok(None);
    };
    let origin = parse_origin(node)?;
    let Some(shape) = geometry.children().find(Node::is_element) else {
        return Ok(None);
    };
    let geometry = match shape.tag_name().name() {
        "mesh" => {
            if let Some(scale) = shape.attribute("scale") {
                let scale = numbers::<3>(shape, "scale", scale)?;
                if scale.iter().any(|s| (s - 1.0).abs() > 1e-12) {
                    return Err(ModelError::UnsupportedMeshUnits { link: link.to_string(), scale });
                }
            }
            Geometry::Mesh { filename: required(shape, "filename")?.to_string(), mesh: None }
        }
        "box" => Geometry::Box { size: numbers(shape, "size", required(shape, "size")?)? },
        "cylinder" => Geometry::Cylinder {
            radius: number(shape, "radius")?.unwrap_or(0.0),
            length: number(shape, "length")?.unwrap_or(0.0),
        },
        "sphere" => Geometry::Sphere { radius: number(shape, "radius")?.unwrap_or(0.0) },
        other => {
            return Err(ModelError::InvalidUrdf(format!("link {link}: unknown geometry <{other}>")))
        }
    };
    Ok(Some(Visual { origin, geometry }))
}

fn parse_joint(node: Node) -> Result<Joint, ModelError> {
    let name = required(node, "name")?.to_string();
    let kind = match required(node, "type")? {
        "revolute" => JointKind::Revolute,
        "fixed" => JointKind::Fixed,
        other => {
            return Err(ModelError::UnsupportedJointKind { joint: name, kind: other.to_string() })
        }
    };
    let link_of = |tag: &str| -> Result<String, ModelError> {
        let n = child(node, tag).ok_or_else(|| {
            ModelError::InvalidUrdf(format!("joint {name} has no <{tag}> element"))
        })?;
        Ok(required(n, "link")?.to_string())
    };
    let parent = link_of("parent")?;
    let child_link = link_of("child")?;
    let origin = parse_origin(node)?;
    let axis = match child(node, "axis") {
        Some(a) => Vector3::from(numbers::<3>(a, "xyz", required(a, "xyz")?)?),
        None => Vector3::x(),
    };
    let limits = match (kind, child(node, "limit")) {
        (JointKind::Fixed, _) => [0.0, 0.0],
        (JointKind::Revolute, None) => DEFAULT_REVOLUTE_LIMITS,
        (JointKind::Revolute, Some(limit)) => {
            [number(limit, "lower")?.unwrap_or(0.0), number(limit, "upper")?.unwrap_or(0.0)]
        }
    };
    Ok(Joint { name, kind, parent, child: child_link, origin, axis, limits })
}

fn parse_patch(node: Node) -> Result<ContactPatch, ModelError> {
    let id = required(node, "id")?.to_string();
    let owner = PatchOwner::parse(required(node, "owner")?);
    let label = node.attribute("label").unwrap_or_default().to_string();
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for p in node.children().filter(|c| c.is_element() && c.tag_name().name() == "point") {
        points.push(Vector3::from(numbers::<3>(p, "xyz", required(p, "xyz")?)?));
        if let Some(n) = p.attribute("normal") {
            normals.push(Vector3::from(numbers::<3>(p, "normal", n)?));
        }
    }
    let normals = match normals.len() {
        0 => None,
        n if n == points.len() => Some(normals),
        _ => {
            return Err(ModelError::InvalidPatch {
                id,
                reason: "either every point or no point carries a normal".into(),
            })
        }
    };
    ContactPatch::new(id, owner, points, normals, label)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn triple(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn write_origin(out: &mut String, indent: &str, t: &RigidTransform) {
    if t == &RigidTransform::identity() {
        return;
    }
    let _ = writeln!(
        out,
        r#"{indent}<origin xyz="{}" rpy="{}"/>"#,
        triple(t.translation().as_slice()),
        triple(&t.rpy())
    );
}

/// Writes `model` as URDF text. Loaded mesh data is not embedded; only the
/// file reference is kept.
pub fn serialize_urdf(model: &HandModel) -> String {
    let mut out = String::from("<?xml version=\"1.0\"?>\n");
    let _ = writeln!(out, r#"<robot name="{}">"#, escape(model.name()));
    for link in model.links() {
        let name = escape(&link.name);
        let Some(visual) = &link.visual else {
            let _ = writeln!(out, r#"  <link name="{name}"/>"#);
            continue;
        };
        let _ = writeln!(out, r#"  <link name="{name}">"#);
        out.push_str("    <visual>\n");
        write_origin(&mut out, "      ", &visual.origin);
        out.push_str("      <geometry>\n        ");
        match &visual.geometry {
            Geometry::Mesh { filename, .. } => {
                let _ = write!(out, r#"<mesh filename="{}"/>"#, escape(filename));
            }
            Geometry::Box { size } => {
                let _ = write!(out, r#"<box size="{}"/>"#, triple(size));
            }
            Geometry::Cylinder { radius, length } => {
                let _ = write!(out, r#"<cylinder radius="{radius}" length="{length}"/>"#);
            }
            Geometry::Sphere { radius } => {
                let _ = write!(out, r#"<sphere radius="{radius}"/>"#);
            }
        }
        out.push_str("\n      </geometry>\n    </visual>\n  </link>\n");
    }
    for joint in model.joints() {
        let kind = match joint.kind {
            JointKind::Revolute => "revolute",
            JointKind::Fixed => "fixed",
        };
        let _ = writeln!(out, r#"  <joint name="{}" type="{kind}">"#, escape(&joint.name));
        let _ = writeln!(out, r#"    <parent link="{}"/>"#, escape(&joint.parent));
        let _ = writeln!(out, r#"    <child link="{}"/>"#, escape(&joint.child));
        write_origin(&mut out, "    ", &joint.origin);
        if joint.is_revolute() {
            let _ = writeln!(out, r#"    <axis xyz="{}"/>"#, triple(joint.axis.as_slice()));
            let _ = writeln!(
                out,
                r#"    <limit lower="{}" upper="{}" effort="0" velocity="0"/>"#,
                joint.limits[0], joint.limits[1]
            );
        }
        out.push_str("  </joint>\n");
    }
    for patch in model.patches() {
        let _ = writeln!(
            out,
            r#"  <contact_patch id="{}" owner="{}" label="{}">"#,
            escape(&patch.id),
            escape(&patch.owner.to_string()),
            escape(&patch.label)
        );
        for (i, p) in patch.points.iter().enumerate() {
            let _ = write!(out, r#"    <point xyz="{}""#, triple(p.as_slice()));
            if let Some(normals) = &patch.normals {
                let _ = write!(out, r#" normal="{}""#, triple(normals[i].as_slice()));
            }
            out.push_str("/>\n");
        }
        out.push_str("  </contact_patch>\n");
    }
    out.push_str("</robot>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_LINK: &str = r#"<?xml version="1.0"?>
<robot name="finger">
  <link name="base"/>
  <link name="tip"><visual><geometry><box size="0.02 0.01 0.03"/></geometry></visual></link>
  <joint name="j1" type="revolute">
    <parent link="base"/><child link="tip"/>
    <origin xyz="0.04 0 0"/>
    <axis xyz="0 0 1"/>
  </joint>
</robot>"#;

    #[test]
    fn parses_two_link_model() {
        let m = parse_urdf(TWO_LINK).unwrap();
        assert_eq!(m.links().len(), 2);
        assert_eq!(m.joints().len(), 1);
        assert_eq!(m.root(), "base");
        let j = m.joint("j1").unwrap();
        assert_eq!(j.limits, DEFAULT_REVOLUTE_LIMITS);
        assert_eq!(j.origin.translation(), &Vector3::new(0.04, 0.0, 0.0));
    }

    #[test]
    fn round_trips_and_omits_empty_patches() {
        let m = parse_urdf(TWO_LINK).unwrap();
        let text = serialize_urdf(&m);
        assert!(!text.contains("contact_patch"));
        let back = parse_urdf(&text).unwrap();
        assert_eq!(m.semantic_diff(&back, 1e-9), None);
    }

    #[test]
    fn patches_round_trip_inline() {
        let m = parse_urdf(TWO_LINK).unwrap();
        let p = ContactPatch::new(
            "pad",
            PatchOwner::Link("tip".into()),
            vec![Vector3::new(0.0, -0.005, 0.01), Vector3::new(0.001, -0.005, 0.012)],
            Some(vec![-Vector3::y(), -Vector3::y()]),
            "index",
        )
        .unwrap();
        let m = m.attach_patch(p).unwrap();
        let back = parse_urdf(&serialize_urdf(&m)).unwrap();
        assert_eq!(m.semantic_diff(&back, 1e-12), None);
        assert_eq!(back.link("tip").unwrap().patches, vec!["pad".to_string()]);
    }

    #[test]
    fn collision_is_fallback_for_visual() {
        let text = r#"<robot name="r">
          <link name="a">
            <collision><geometry><sphere radius="0.5"/></geometry></collision>
          </link>
          <link name="b">
            <collision><geometry><sphere radius="0.5"/></geometry></collision>
            <visual><geometry><box size="1 2 3"/></geometry></visual>
          </link>
          <joint name="j" type="fixed"><parent link="a"/><child link="b"/></joint>
        </robot>"#;
        let m = parse_urdf(text).unwrap();
        assert!(matches!(
            m.link("a").unwrap().visual.as_ref().unwrap().geometry,
            Geometry::Sphere { radius } if radius == 0.5
        ));
        assert!(matches!(
            m.link("b").unwrap().visual.as_ref().unwrap().geometry,
            Geometry::Box { .. }
        ));
    }

    #[test]
    fn error_classes() {
        let joint = |kind: &str, extra: &str| {
            format!(
                r#"<robot name="r"><link name="a"/><link name="b"/>
                <joint name="j" type="{kind}"><parent link="a"/><child link="b"/>{extra}</joint></robot>"#
            )
        };
        assert_eq!(parse_urdf("<robot").unwrap_err().kind(), "MalformedXml");
        for kind in ["prismatic", "continuous", "planar"] {
            assert_eq!(
                parse_urdf(&joint(kind, "")).unwrap_err(),
                ModelError::UnsupportedJointKind { joint: "j".into(), kind: kind.into() }
            );
        }
        assert_eq!(
            parse_urdf(&joint("revolute", r#"<axis xyz="0 0 0"/>"#)).unwrap_err().kind(),
            "NonUnitAxis"
        );
        let m = parse_urdf(&joint("revolute", r#"<axis xyz="0 0 2"/>"#)).unwrap();
        assert_eq!(m.joint("j").unwrap().axis, Vector3::z());
        assert_eq!(m.warnings().len(), 1);

        let dup = r#"<robot name="r"><link name="a"/><link name="a"/></robot>"#;
        assert_eq!(parse_urdf(dup).unwrap_err(), ModelError::DuplicateName("a".into()));
        let missing = r#"<robot name="r"><link name="a"/>
            <joint name="j" type="fixed"><parent link="a"/><child link="ghost"/></joint></robot>"#;
        assert_eq!(parse_urdf(missing).unwrap_err(), ModelError::MissingLink("ghost".into()));
        let scaled = r#"<robot name="r"><link name="a"><visual><geometry>
            <mesh filename="a.stl" scale="0.001 0.001 0.001"/></geometry></visual></link></robot>"#;
        assert_eq!(parse_urdf(scaled).unwrap_err().kind(), "UnsupportedMeshUnits");
    }

    #[test]
    fn explicit_limits_are_kept() {
        let text = r#"<robot name="r"><link name="a"/><link name="b"/>
            <joint name="j" type="revolute"><parent link="a"/><child link="b"/>
            <limit lower="-0.5" upper="0.7" effort="1" velocity="1"/></joint></robot>"#;
        assert_eq!(parse_urdf(text).unwrap().joint("j").unwrap().limits, [-0.5, 0.7]);
    }
}
