//! Pinhole camera basics: project a camera-frame point to the image,
//! back-project it at known depth, and test frustum membership.

use monolift::camera::CameraIntrinsics;
use monolift::Point3;

fn main() {
    let intr = CameraIntrinsics::new(721.5377, 609.5593, 172.854, 1242.0, 375.0).unwrap();

    let p = Point3::new(1.8, 0.4, 12.0);
    let px = intr.project(p).unwrap();
    println!("camera point ({}, {}, {})", p.x, p.y, p.z);
    println!("projects to pixel ({:.3}, {:.3})", px.u, px.v);

    let back = intr.backproject(px, p.z).unwrap();
    println!("back-projected at depth {}: ({}, {}, {})", p.z, back.x, back.y, back.z);
    println!("round-trip error: {:.3e} m", (back - p).norm());

    // Frustum membership is evaluated on the projected position.
    for (label, q) in [
        ("center of the road", Point3::new(0.0, 1.2, 25.0)),
        ("far off to the left", Point3::new(-60.0, 1.2, 25.0)),
        ("behind the camera", Point3::new(0.0, 0.0, -5.0)),
    ] {
        println!("{label}: in frustum = {}", intr.in_frustum(q));
    }
}
