//! Serve a throwaway dataset of synthetic sequences, click once through the
//! HTTP API, and shut down.
//!
//! `cargo run -p rmot-service --example serve_fixtures`

use std::sync::Arc;

use rmot::data_model::save_annotation;
use rmot::synthetic::{synthetic_dataset, FixtureSpec};
use rmot_service::{serve_on, Dataset};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

async fn request(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> String {
    let mut stream = TcpStream::connect(addr).await.unwrap();
    let head = format!(
        "{method} {path} HTTP/1.1\r\nhost: {addr}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).await.unwrap();
    stream.write_all(body.as_bytes()).await.unwrap();
    let mut out = String::new();
    stream.read_to_string(&mut out).await.unwrap();
    out.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or(out)
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let anns = synthetic_dataset(2, 4, &FixtureSpec::default());
    for a in &anns {
        save_annotation(a, dir.path().join(format!("{}.json", a.sequence_id)))?;
    }
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve_on(Arc::new(Dataset::load(dir.path())?), listener, async {
        let _ = stopped.await;
    }));
    println!("serving {} sequences on http://{addr}", anns.len());

    println!("GET /sequences\n{}", request(addr, "GET", "/sequences", "").await);
    let obj = &anns[0].objects[0];
    let frames: Vec<u32> = obj.boxes.keys().copied().collect();
    let click = format!(
        r#"{{"expression_id": 0, "object_id": {}, "start": {}, "end": {}, "revision": 0}}"#,
        obj.id,
        frames[0],
        frames[frames.len() - 1]
    );
    println!("POST click\n{}", request(addr, "POST", "/sequences/synth-00/clicks", &click).await);
    println!("again with the old revision\n{}", request(addr, "POST", "/sequences/synth-00/clicks", &click).await);

    let _ = stop.send(());
    server.await??;
    Ok(())
}
