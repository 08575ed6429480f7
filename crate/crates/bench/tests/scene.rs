use lineguide::page::detect_fingertip;
use lineguide_bench::vga_scene;

#[test]
fn vga_scene_frames_show_the_fingertip_and_read_words() {
    let scene = vga_scene(4);
    assert_eq!((scene.rig.width, scene.rig.height), (640, 480));
    let mut state = scene.pipeline.new_session().unwrap();
    let mut words = 0;
    for (i, frame) in scene.frames.iter().enumerate() {
        assert_eq!((frame.width(), frame.height()), (640, 480));
        let tip = detect_fingertip(&scene.pipeline.rectify(frame), &scene.pipeline.config().page).unwrap();
        assert!(tip.position.distance(&scene.rig.tip_pixel()) <= 2.0);
        words += usize::from(scene.pipeline.step(frame, i as f64 / 3.0, &mut state).diagnostics.word.is_some());
    }
    assert!(words >= 3, "{words} words read");
}
