//! Runs the HTTP service on an ephemeral port, logs in, asks for
//! suggestions and shuts down. Pass `--forever` to keep it running.

use hatewatch::retrieval::sample_pairs;
use hatewatch::service::{serve, Accounts, AppState, ServiceConfig};
use hatewatch::store::{open_store, OpenMode};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = open_store(dir.path(), OpenMode::ReadWrite)?;
    let mut accounts = Accounts::default();
    accounts.provision("operator", "change me");
    let state = AppState::builder(ServiceConfig::default(), store).base_pairs(sample_pairs()).accounts(accounts).build()?;

    let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    drop(listener);
    let forever = std::env::args().any(|a| a == "--forever");
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(state, addr, async move {
        let _ = stopped.await;
    }));
    println!("listening on http://{addr}");
    if forever {
        server.await??;
        return Ok(());
    }
    tokio::time::sleep(std::time::Duration::from_millis(100)).await;

    let base = format!("http://{addr}");
    let login = post(&base, "/auth/login", None, r#"{"operator_id":"operator","secret":"change me"}"#).await?;
    println!("POST /auth/login -> {login}");
    let token = serde_json::from_str::<serde_json::Value>(&login)?["data"]["token"].as_str().unwrap_or_default().to_string();
    let body = r#"{"text":"Every Muslim is a potential terrorist","k":2}"#;
    println!("POST /cn/suggest -> {}", post(&base, "/cn/suggest", Some(&token), body).await?);

    let _ = stop.send(());
    server.await??;
    Ok(())
}

/// Minimal HTTP/1.1 client over a raw socket; good enough for a demo.
async fn post(base: &str, path: &str, token: Option<&str>, body: &str) -> std::io::Result<String> {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let host = base.trim_start_matches("http://");
    let mut stream = tokio::net::TcpStream::connect(host).await?;
    let auth = token.map(|t| format!("Authorization: Bearer {t}\r\n")).unwrap_or_default();
    let request = format!(
        "POST {path} HTTP/1.1\r\nHost: {host}\r\n{auth}Content-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(request.as_bytes()).await?;
    let mut response = String::new();
    stream.read_to_string(&mut response).await?;
    Ok(response.split("\r\n\r\n").nth(1).unwrap_or_default().to_string())
}
