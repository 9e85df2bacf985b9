use std::collections::VecDeque;
use std::sync::Mutex;

use super::{BackendDescriptor, ChatBackend, ChatMessage, GatewayError, GenerationParams};

type Responder = dyn Fn(&[ChatMessage], &GenerationParams) -> Result<String, GatewayError>
    + Send
    + Sync;

/// In-process backend answering from a queue of canned replies, or from a
/// closure over the request.
pub struct ScriptedBackend {
    descriptor: BackendDescriptor,
    queue: Mutex<VecDeque<String>>,
    responder: Option<Box<Responder>>,
    calls: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedBackend {
    pub fn new(descriptor: BackendDescriptor, replies: Vec<String>) -> Self {
        Self {
            descriptor,
            queue: Mutex::new(replies.into()),
            responder: None,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn with_responder<F>(descriptor: BackendDescriptor, responder: F) -> Self
    where
        F: Fn(&[ChatMessage], &GenerationParams) -> Result<String, GatewayError>
            + Send
            + Sync
            + 'static,
    {
        Self {
            descriptor,
            queue: Mutex::new(VecDeque::new()),
            responder: Some(Box::new(responder)),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.lock().expect("calls lock").len()
    }

    /// Message lists received so far, oldest first.
    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.calls.lock().expect("calls lock").clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("queue lock").len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<ChatMessage, GatewayError> {
        self.calls
            .lock()
            .expect("calls lock")
            .push(messages.to_vec());
        let content = match &self.responder {
            Some(responder) => responder(messages, params)?,
            None => self
                .queue
                .lock()
                .expect("queue lock")
                .pop_front()
                .ok_or_else(|| GatewayError::Transport {
                    attempts: 1,
                    message: "scripted backend has no replies left".into(),
                })?,
        };
        Ok(ChatMessage::assistant(content))
    }
}
