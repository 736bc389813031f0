//! Renders ObjectPong frames, extracts objects with connected components and
//! builds the slot feature vector a symbolic policy reads.

use symforest::envs::{self, actions, ObjectPong, Skin};
use symforest::expr::Action;
use symforest::objects::{connected_components, featurize, ExtractorConfig};

fn main() -> Result<(), symforest::Error> {
    let cfg = ExtractorConfig::default();
    for skin in [Skin::Base, Skin::Alt] {
        let mut env = ObjectPong::new(skin);
        envs::Env::reset(&mut env, 3);
        for _ in 0..10 {
            envs::Env::step(&mut env, &Action::Discrete(actions::NOOP))?;
        }
        let frame = env.render_frame();
        let objects = connected_components(&frame, cfg.intensity_threshold, &cfg.class_levels);
        println!("{skin:?}: {} lit pixels, {} objects", frame.count_nonzero(), objects.len());
        for o in objects.objects.iter().take(4) {
            println!("  class {} at ({:.1}, {:.1}) size {}x{}", o.class_id, o.x, o.y, o.w, o.h);
        }
        let f = featurize(&objects, 4);
        println!("  first slots: {:?}", &f.values[..8]);
    }

    let mut env = ObjectPong::new(Skin::Base);
    envs::Env::reset(&mut env, 0);
    let mut reward = 0.0;
    loop {
        let a = Action::Discrete(env.tracker_action());
        let r = envs::Env::step(&mut env, &a)?;
        reward += r.reward;
        if r.done {
            break;
        }
    }
    println!("scripted tracker: {} hits, {} misses, reward {reward}", env.hits(), env.misses());
    Ok(())
}
