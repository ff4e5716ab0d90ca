//! Transports: newline-delimited frames over any reader/writer pair (stdio)
//! and one JSON frame per websocket text message.

use std::io::{self, BufRead, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use tungstenite::{Message, WebSocket};

use super::{ServerMessage, Session, SessionInput};

const WS_POLL: Duration = Duration::from_millis(20);

/// Serves one session over a line-oriented reader and a writer until the
/// reader reaches end of input. Pipeline events are interleaved with
/// client frames as they arrive.
pub fn serve_io<R, W>(mut session: Session, reader: R, mut writer: W) -> io::Result<()>
where
    R: BufRead + Send + 'static,
    W: Write,
{
    let (tx, rx) = mpsc::channel();
    session.attach(tx.clone());
    std::thread::Builder::new()
        .name("ivie-stdin".into())
        .spawn(move || {
            for line in reader.split(b'\n') {
                match line {
                    Ok(bytes) if bytes.iter().all(u8::is_ascii_whitespace) => continue,
                    Ok(bytes) => {
                        if tx.send(SessionInput::Frame(bytes)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(SessionInput::Closed);
        })?;

    for input in rx {
        let closing = matches!(input, SessionInput::Closed);
        for msg in session.handle_input(input) {
            writer.write_all(&msg.encode())?;
        }
        writer.flush()?;
        if closing {
            break;
        }
    }
    Ok(())
}

pub fn serve_stdio(session: Session) -> io::Result<()> {
    let stdin = io::BufReader::new(io::stdin());
    serve_io(session, stdin, io::stdout().lock())
}

type SessionFactory = dyn Fn() -> Session + Send + Sync;

/// Websocket listener; every connection gets its own session and thread.
pub struct WsServer {
    listener: TcpListener,
}

impl WsServer {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(WsServer {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections forever.
    pub fn run(self, make_session: impl Fn() -> Session + Send + Sync + 'static) -> io::Result<()> {
        let factory: Arc<SessionFactory> = Arc::new(make_session);
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            let factory = Arc::clone(&factory);
            std::thread::Builder::new()
                .name("ivie-ws-conn".into())
                .spawn(move || {
                    let _ = serve_ws_connection(stream, factory());
                })?;
        }
        Ok(())
    }

    /// Accepts connections on a background thread.
    pub fn spawn(
        self,
        make_session: impl Fn() -> Session + Send + Sync + 'static,
    ) -> io::Result<SocketAddr> {
        let addr = self.local_addr()?;
        std::thread::Builder::new()
            .name("ivie-ws-accept".into())
            .spawn(move || {
                let _ = self.run(make_session);
            })?;
        Ok(addr)
    }
}

#[allow(clippy::result_large_err)]
fn send_all(
    ws: &mut WebSocket<TcpStream>,
    msgs: Vec<ServerMessage>,
) -> Result<(), tungstenite::Error> {
    for msg in msgs {
        let mut bytes = msg.encode();
        bytes.pop();
        ws.send(Message::Text(
            String::from_utf8(bytes).expect("JSON is UTF-8"),
        ))?;
    }
    Ok(())
}

#[allow(clippy::result_large_err)]
fn serve_ws_connection(stream: TcpStream, mut session: Session) -> Result<(), tungstenite::Error> {
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_ref().set_read_timeout(Some(WS_POLL))?;
    let (tx, rx) = mpsc::channel();
    session.attach(tx);

    let result = loop {
        match ws.read() {
            Ok(Message::Text(text)) => {
                let mut out = Vec::new();
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    out.extend(session.handle_frame(line.as_bytes()));
                }
                if let Err(e) = send_all(&mut ws, out) {
                    break Err(e);
                }
            }
            Ok(Message::Binary(bytes)) => {
                let out = session.handle_frame(&bytes);
                if let Err(e) = send_all(&mut ws, out) {
                    break Err(e);
                }
            }
            Ok(Message::Close(_)) => break Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                break Ok(())
            }
            Err(e) => break Err(e),
        }
        let mut out = Vec::new();
        while let Ok(input) = rx.try_recv() {
            out.extend(session.handle_input(input));
        }
        if let Err(e) = send_all(&mut ws, out) {
            break Err(e);
        }
    };
    let closing = session.close();
    let _ = send_all(&mut ws, closing);
    let _ = ws.close(None);
    let _ = ws.flush();
    result
}
