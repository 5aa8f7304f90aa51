//! Log an episode, replay it line by line, then snapshot and reload its memory.

use std::io::Cursor;

use pemsim::bench::{builtin_scenario, verify_snapshot};
use pemsim::episode::{replay, Episode, SharedBuf};

fn main() -> pemsim::Result<()> {
    let spec = builtin_scenario("memory_task_twin_houses").expect("builtin")?;
    let buf = SharedBuf::default();
    let (result, memory) = Episode::new(&spec, 7)?.with_log(Box::new(buf.clone()))?.finish()?;
    let log = buf.take();
    println!("episode solved {}/{} tasks, log has {} lines", result.solved(), result.tasks.len(), log.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count());
    println!("replay matched {} lines", replay(Cursor::new(&log))?);

    let memory = memory.expect("place_event agent keeps a memory");
    let text = memory.to_snapshot_string();
    let back = verify_snapshot(&text)?;
    println!("snapshot: {} bytes, {} frames, reload identical: {}", text.len(), back.len(), back.to_snapshot_string() == text);
    Ok(())
}
