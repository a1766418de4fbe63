use std::io::{BufReader, BufWriter, Read, Write};
use std::sync::Arc;

use super::codec::{decode_payload, read_payload, salvage_id, write_message};
use super::messages::{Envelope, Message, Role, WireDetection, WireImage, PROTOCOL_VERSION};
use crate::error::{Error, Result};
use crate::mask::LabelSpace;
use crate::models::{Overseer, VideoSegmenter};

/// Models a bridge server exposes.
pub struct ServedModels {
    pub labels: Arc<LabelSpace>,
    pub overseer: Option<Box<dyn Overseer>>,
    pub segmenter: Option<Box<dyn VideoSegmenter>>,
}

impl ServedModels {
    pub fn roles(&self) -> Vec<Role> {
        let mut roles = Vec::new();
        if self.overseer.is_some() {
            roles.push(Role::Overseer);
        }
        if self.segmenter.is_some() {
            roles.push(Role::Segmenter);
        }
        roles
    }

    fn handle(&mut self, msg: Message) -> Result<Message> {
        let labels = &self.labels;
        match msg {
            Message::Detect { frame_index, frame } => {
                let overseer = self.overseer.as_ref().ok_or_else(|| Error::invalid("overseer role not served"))?;
                let out = overseer.detect(frame_index, &frame.to_frame()?)?;
                Ok(Message::Detections {
                    detections: out.detections.iter().map(WireDetection::from_detection).collect(),
                })
            }
            Message::Prompt { t, frame, mask, anchors } => {
                let seg = self.segmenter.as_mut().ok_or_else(|| Error::invalid("segmenter role not served"))?;
                let frame = frame.to_frame()?;
                let mask = mask.map(|m| m.to_mask(labels)).transpose()?;
                let anchors = anchors.iter().map(|a| a.to_anchor(frame.dims())).collect::<Result<Vec<_>>>()?;
                let out = seg.prompt(t, &frame, mask.as_ref(), &anchors)?;
                Ok(Message::Mask { mask: WireImage::from_mask(&out) })
            }
            Message::Step { frame } => {
                let seg = self.segmenter.as_mut().ok_or_else(|| Error::invalid("segmenter role not served"))?;
                let out = seg.step(&frame.to_frame()?)?;
                Ok(Message::Mask { mask: WireImage::from_mask(&out) })
            }
            Message::Rewind { t } => {
                let seg = self.segmenter.as_mut().ok_or_else(|| Error::invalid("segmenter role not served"))?;
                seg.rewind(t)?;
                Ok(Message::Ok)
            }
            other => Err(Error::Protocol(format!("unexpected {} request", other.kind()))),
        }
    }
}

/// Answers requests until `bye` or the end of the input stream. Model
/// failures and malformed requests are answered with `error` messages and
/// leave the connection open.
pub fn serve(models: &mut ServedModels, reader: impl Read, writer: impl Write) -> Result<()> {
    let mut reader = BufReader::new(reader);
    let mut writer = BufWriter::new(writer);
    let mut greeted = false;
    while let Some(payload) = read_payload(&mut reader)? {
        let (id, body) = match decode_payload(&payload) {
            Err(e) => (salvage_id(&payload).unwrap_or(0), Message::Error { message: e.to_string() }),
            Ok(Envelope { id, body }) => {
                let reply = match body {
                    Message::Hello { version, roles } => {
                        let offered = models.roles();
                        if version != PROTOCOL_VERSION {
                            Message::Error {
                                message: format!(
                                    "unsupported protocol version {version}; this server speaks {PROTOCOL_VERSION}"
                                ),
                            }
                        } else if let Some(r) = roles.iter().find(|r| !offered.contains(r)) {
                            Message::Error { message: format!("role {r:?} is not served") }
                        } else {
                            greeted = true;
                            Message::Capabilities {
                                version: PROTOCOL_VERSION,
                                roles: offered,
                                labels: models.labels.names().to_vec(),
                            }
                        }
                    }
                    Message::Bye => {
                        write_message(&mut writer, &Envelope { id, body: Message::Ok })?;
                        return Ok(());
                    }
                    _ if !greeted => Message::Error { message: "handshake required before requests".into() },
                    body => models.handle(body).unwrap_or_else(|e| Message::Error { message: e.to_string() }),
                };
                (id, reply)
            }
        };
        write_message(&mut writer, &Envelope { id, body })?;
    }
    Ok(())
}
