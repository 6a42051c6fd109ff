//! CHAP packets (RFC 1994) as carried in PPP protocol 0xC223.
//!
//! Challenge and Response carry a length-prefixed value followed by the
//! sender's name; Success and Failure carry a free-form message. The MD5
//! digest itself is computed by callers (see `tunnel::auth`), this module
//! only moves bytes.

use super::WireError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ChapCode {
    Challenge = 1,
    Response = 2,
    Success = 3,
    Failure = 4,
}

impl ChapCode {
    pub fn from_u8(value: u8) -> Option<ChapCode> {
        Some(match value {
            1 => ChapCode::Challenge,
            2 => ChapCode::Response,
            3 => ChapCode::Success,
            4 => ChapCode::Failure,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChapPacket {
    /// Challenge or Response: id, value, name.
    Value {
        code: ChapCode,
        id: u8,
        value: Vec<u8>,
        name: String,
    },
    /// Success or Failure: id, message.
    Status {
        code: ChapCode,
        id: u8,
        message: String,
    },
}

impl ChapPacket {
    pub fn challenge(id: u8, value: Vec<u8>, name: &str) -> ChapPacket {
        ChapPacket::Value {
            code: ChapCode::Challenge,
            id,
            value,
            name: name.to_string(),
        }
    }

    pub fn response(id: u8, value: Vec<u8>, name: &str) -> ChapPacket {
        ChapPacket::Value {
            code: ChapCode::Response,
            id,
            value,
            name: name.to_string(),
        }
    }

    pub fn success(id: u8) -> ChapPacket {
        ChapPacket::Status {
            code: ChapCode::Success,
            id,
            message: String::new(),
        }
    }

    pub fn failure(id: u8, message: &str) -> ChapPacket {
        ChapPacket::Status {
            code: ChapCode::Failure,
            id,
            message: message.to_string(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (code, id, body) = match self {
            ChapPacket::Value {
                code,
                id,
                value,
                name,
            } => {
                let mut body = Vec::with_capacity(1 + value.len() + name.len());
                body.push(value.len() as u8);
                body.extend_from_slice(value);
                body.extend_from_slice(name.as_bytes());
                (*code, *id, body)
            }
            ChapPacket::Status { code, id, message } => (*code, *id, message.as_bytes().to_vec()),
        };
        let length = (4 + body.len()) as u16;
        let mut out = Vec::with_capacity(length as usize);
        out.push(code as u8);
        out.push(id);
        out.extend_from_slice(&length.to_be_bytes());
        out.extend_from_slice(&body);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<ChapPacket, WireError> {
        if buf.len() < 4 {
            return Err(WireError::Truncated("CHAP header"));
        }
        let code =
            ChapCode::from_u8(buf[0]).ok_or(WireError::InvalidMessage("unknown CHAP code"))?;
        let id = buf[1];
        let length = u16::from_be_bytes([buf[2], buf[3]]) as usize;
        if length < 4 || buf.len() < length {
            return Err(WireError::Truncated("CHAP body"));
        }
        let body = &buf[4..length];
        match code {
            ChapCode::Challenge | ChapCode::Response => {
                if body.is_empty() {
                    return Err(WireError::Truncated("CHAP value size"));
                }
                let value_len = body[0] as usize;
                if body.len() < 1 + value_len {
                    return Err(WireError::Truncated("CHAP value"));
                }
                Ok(ChapPacket::Value {
                    code,
                    id,
                    value: body[1..1 + value_len].to_vec(),
                    name: String::from_utf8_lossy(&body[1 + value_len..]).into_owned(),
                })
            }
            ChapCode::Success | ChapCode::Failure => Ok(ChapPacket::Status {
                code,
                id,
                message: String::from_utf8_lossy(body).into_owned(),
            }),
        }
    }

    pub fn id(&self) -> u8 {
        match self {
            ChapPacket::Value { id, .. } | ChapPacket::Status { id, .. } => *id,
        }
    }

    pub fn code(&self) -> ChapCode {
        match self {
            ChapPacket::Value { code, .. } | ChapPacket::Status { code, .. } => *code,
        }
    }
}
