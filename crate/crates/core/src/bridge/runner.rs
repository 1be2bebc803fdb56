//! The device runs on its own thread. Everything that touches it goes
//! through [`DeviceHandle::call`], so requests from many connections are
//! applied one at a time.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::service::Device;

/// How the virtual clock moves while serving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// Follows the wall clock.
    Realtime,
    /// Moves only through [`DeviceHandle::advance`].
    Frozen,
}

const REALTIME_STEP: Duration = Duration::from_millis(10);
const FLUSH_EVERY: Duration = Duration::from_secs(1);

type Job = Box<dyn FnOnce(&mut Device) + Send>;

enum Msg {
    Job(Job),
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceGone;

impl std::fmt::Display for DeviceGone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("device thread stopped")
    }
}

impl std::error::Error for DeviceGone {}

#[derive(Clone)]
pub struct DeviceHandle {
    tx: mpsc::Sender<Msg>,
}

impl DeviceHandle {
    /// Run `f` on the device thread and wait for its result.
    pub fn call<R: Send + 'static>(
        &self,
        f: impl FnOnce(&mut Device) -> R + Send + 'static,
    ) -> Result<R, DeviceGone> {
        let (reply, rx) = mpsc::channel();
        let job: Job = Box::new(move |d| {
            let _ = reply.send(f(d));
        });
        self.tx.send(Msg::Job(job)).map_err(|_| DeviceGone)?;
        rx.recv().map_err(|_| DeviceGone)
    }

    /// Move the virtual clock forward by `ms`.
    pub fn advance(&self, ms: u64) -> Result<u64, DeviceGone> {
        self.call(move |d| {
            d.run_for(ms);
            d.now_ms()
        })
    }

    fn stop(&self) {
        let _ = self.tx.send(Msg::Stop);
    }
}

pub struct DeviceRunner {
    handle: DeviceHandle,
    thread: Option<JoinHandle<Device>>,
}

impl DeviceRunner {
    pub fn spawn(device: Device, pacing: Pacing) -> Self {
        let (tx, rx) = mpsc::channel::<Msg>();
        let thread = thread::Builder::new()
            .name("device".into())
            .spawn(move || {
                let mut device = device;
                let wall0 = Instant::now();
                let virt0 = device.now_ms();
                let mut flushed = Instant::now();
                loop {
                    let msg = match pacing {
                        Pacing::Frozen => rx.recv().map_err(|_| RecvTimeoutError::Disconnected),
                        Pacing::Realtime => rx.recv_timeout(REALTIME_STEP),
                    };
                    if pacing == Pacing::Realtime {
                        device.advance_to(virt0 + wall0.elapsed().as_millis() as u64);
                        if flushed.elapsed() >= FLUSH_EVERY {
                            device.flush();
                            flushed = Instant::now();
                        }
                    }
                    match msg {
                        Ok(Msg::Job(job)) => job(&mut device),
                        Ok(Msg::Stop) | Err(RecvTimeoutError::Disconnected) => break,
                        Err(RecvTimeoutError::Timeout) => {}
                    }
                }
                device
            })
            .expect("spawn device thread");
        Self {
            handle: DeviceHandle { tx },
            thread: Some(thread),
        }
    }

    pub fn handle(&self) -> DeviceHandle {
        self.handle.clone()
    }

    /// Stop the thread and get the device back.
    pub fn stop(mut self) -> Option<Device> {
        self.handle.stop();
        self.thread.take().and_then(|t| t.join().ok())
    }
}

impl Drop for DeviceRunner {
    fn drop(&mut self) {
        self.handle.stop();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
