//! Reading a demonstration corpus holds one episode at a time.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use navfuse::io::{self, DemoWriter};
use navfuse::pipeline::generate_maps;
use navfuse_core::expert::{generate_demonstrations, ExpertConfig};
use navfuse_core::gridworld::MapGenConfig;

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

#[test]
fn peak_memory_is_independent_of_corpus_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demos.jsonl");
    let maps = generate_maps(&MapGenConfig { width: 20, height: 20, ..Default::default() }, "m", 4, 8).unwrap();
    let cfg = ExpertConfig { noise_eps: 0.2, max_steps: 200, seed: 1 };
    let base = generate_demonstrations(maps.iter().map(|m| (m.id.as_str(), &m.grid)), 5, &cfg, (1.0, 6.0)).unwrap();
    {
        let mut w = DemoWriter::new(std::io::BufWriter::new(std::fs::File::create(&path).unwrap()));
        for copy in 0..100 {
            for r in &base.records {
                let mut r = r.clone();
                r.episode.id = format!("{}-{copy}", r.episode.id);
                w.write(&r).unwrap();
            }
        }
        w.finish().unwrap();
    }
    let file_size = std::fs::metadata(&path).unwrap().len() as usize;
    let expected = base.records.len() * 100;
    assert_eq!(expected, 2000);

    let baseline = LIVE.load(Ordering::Relaxed);
    PEAK.store(baseline, Ordering::Relaxed);
    let mut count = 0;
    let mut steps = 0;
    for r in io::read_demos(&path).unwrap() {
        let r = r.unwrap();
        count += 1;
        steps += r.steps.len();
    }
    let peak = PEAK.load(Ordering::Relaxed) - baseline;
    assert_eq!(count, expected);
    assert!(steps > 0);
    assert!(
        peak * 50 < file_size,
        "peak {peak} bytes while streaming a {file_size} byte corpus"
    );
}
