//! Run-length encoded masks: encoding, point membership and bounding boxes.

use masklift::masks::{rle_decode, rle_encode, InstanceMask};

fn main() -> masklift::error::Result<()> {
    // 6 x 4 image, an L-shaped region
    #[rustfmt::skip]
    let bits = [
        0, 1, 1, 0, 0, 0,
        0, 1, 1, 0, 0, 0,
        0, 1, 1, 1, 1, 0,
        0, 0, 0, 0, 0, 0,
    ].map(|b| b == 1);
    let counts = rle_encode(&bits);
    println!("counts (background first): {counts:?}");
    assert_eq!(rle_decode(&counts), bits);

    let mask = InstanceMask::from_rle(0, "building", 0.8, 6, 4, counts)?;
    println!("area {} bbox {:?}", mask.area(), mask.bounding_box().as_array());
    for (x, y) in [(1.2, 0.9), (4.99, 2.5), (4.0, 1.0), (-0.5, 0.0)] {
        println!("contains({x}, {y}) = {}", mask.contains(x, y));
    }
    Ok(())
}
