//! Depth from a windshield keypoint pair: the pixel span of a vertical
//! model edge, its known metric height, and the focal length determine the
//! instance depth in closed form.

use monolift::camera::CameraIntrinsics;
use monolift::geometry3d::Rect;
use monolift::lifting::{instance_depth, select_depth_pair, Detection2D, ImageKeypoint};
use monolift::templates::DepthPair;
use monolift::TemplateSet;

/// A detection whose front-left windshield pair spans `span` pixels.
fn detection_with_span(span: f64) -> Detection2D {
    let mut det = Detection2D::hidden(Rect::new(250.0, 50.0, 350.0, 200.0));
    let pair = DepthPair::FrontLeft;
    det.keypoints[pair.top().code()] = ImageKeypoint::new(300.0, 100.0, true);
    det.keypoints[pair.bottom().code()] = ImageKeypoint::new(300.0, 100.0 + span, true);
    det
}

fn main() {
    let intr = CameraIntrinsics::new(700.0, 640.0, 360.0, 1280.0, 720.0).unwrap();
    let set = TemplateSet::builtin();
    let sedan = set.for_class(1).unwrap();

    let det = detection_with_span(28.0);
    let (pair, span) = select_depth_pair(&det).unwrap();
    println!("selected pair {pair:?} with pixel span {span}");

    let r = sedan.pair_height_ratio(pair);
    let h = sedan.mean_dims.h;
    println!("template height ratio {r:.4}, class mean height {h} m");

    let (z, _) = instance_depth(&intr, &det, sedan, h).unwrap();
    println!("depth = f * r * h / span = {} * {r:.4} * {h} / {span} = {z} m", intr.f);

    // Depth scales inversely with the pixel span: a car twice as far away
    // subtends half the pixels.
    println!("\n{:>10} {:>12}", "span px", "depth m");
    for factor in [0.5, 1.0, 2.0, 4.0] {
        let det = detection_with_span(28.0 * factor);
        let (z, _) = instance_depth(&intr, &det, sedan, h).unwrap();
        println!("{:>10} {:>12.4}", 28.0 * factor, z);
    }
}
