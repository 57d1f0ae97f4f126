//! A tour of the built-in keypoint templates: the five car classes, their
//! mean dimensions, windshield pair height ratios, and how a template
//! keypoint lands in the camera frame for a posed instance.

use monolift::templates::{model_to_camera, DepthPair, KeypointId};
use monolift::{Point3, TemplateSet};

fn main() {
    let set = TemplateSet::builtin();
    println!("{} built-in classes\n", set.len());

    println!(
        "{:<4}{:<10}{:>7}{:>7}{:>7}   {:>7}{:>7}{:>7}{:>7}",
        "id", "name", "w", "h", "l", "r_fl", "r_fr", "r_rl", "r_rr"
    );
    for t in set.iter() {
        let ratios: Vec<String> = DepthPair::ALL
            .iter()
            .map(|p| format!("{:>7.3}", t.pair_height_ratio(*p)))
            .collect();
        println!(
            "{:<4}{:<10}{:>7.2}{:>7.2}{:>7.2}   {}",
            t.class_id,
            t.class_name,
            t.mean_dims.w,
            t.mean_dims.h,
            t.mean_dims.l,
            ratios.join("")
        );
    }

    // Model-frame coordinates are fractions of the box extent, so placing a
    // keypoint only needs the box pose and metric dims.
    let sedan = set.for_class(1).unwrap();
    let center = Point3::new(-2.0, 0.9, 14.0);
    let yaw = 0.6;
    println!("\nsedan posed at ({}, {}, {}) with yaw {yaw}:", center.x, center.y, center.z);
    for id in [KeypointId::WheelFl, KeypointId::WindshieldFrontTl, KeypointId::HeadlightR] {
        let p = model_to_camera(sedan.keypoint(id), center, yaw, sedan.mean_dims);
        println!("  {:<22} -> ({:+.3}, {:+.3}, {:+.3})", id.name(), p.x, p.y, p.z);
    }

    // Every template passes its own invariant check.
    for t in set.iter() {
        t.validate().unwrap();
    }
    println!("\nall templates satisfy the geometric invariants");
}
