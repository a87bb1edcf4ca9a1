//! Message payload schemas, one per message type.

use aos_core::codec::{self, Reader};
use aos_core::{ClassDescriptor, DecodeError, ObjectId, SerializedObject, Value};

use crate::error::{ErrorCode, RemoteError, WireError};
use crate::types::{BackendId, BackendRecord, ObjectLocationRecord};

/// Message type bytes. Responses are `request | 0x80`; ERROR is 0xFF.
pub mod msg_type {
    pub const STORE: u8 = 1;
    pub const CALL: u8 = 2;
    pub const GET_ATTR: u8 = 3;
    pub const SET_ATTR: u8 = 4;
    pub const MOVE: u8 = 5;
    pub const REPLICATE: u8 = 6;
    pub const FETCH_OBJECT: u8 = 7;
    pub const HEALTH: u8 = 8;
    pub const METRICS: u8 = 9;
    pub const REGISTER_BACKEND: u8 = 10;
    pub const LOOKUP: u8 = 11;
    pub const RESPONSE_BIT: u8 = 0x80;
    pub const ERROR: u8 = 0xFF;
}

/// STORE bodies: a full object addressed to a backend, or a placement
/// record addressed to the metadata service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreBody {
    Object(SerializedObject),
    Location(ObjectLocationRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectRole {
    Primary,
    Replica,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LookupQuery {
    Object(ObjectId),
    Class(String),
    Backends,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LookupAnswer {
    Object(ObjectLocationRecord),
    Class(ClassDescriptor),
    Backends(Vec<BackendRecord>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    Store(StoreBody),
    Call {
        object_id: ObjectId,
        method: String,
        args: Vec<Value>,
    },
    GetAttr {
        object_id: ObjectId,
        name: String,
    },
    SetAttr {
        object_id: ObjectId,
        name: String,
        value: Value,
    },
    Move {
        object_id: ObjectId,
        target: BackendId,
    },
    Replicate {
        object_id: ObjectId,
        target: BackendId,
    },
    FetchObject {
        role: ObjectRole,
        object: SerializedObject,
    },
    Health,
    Metrics,
    RegisterBackend {
        address: String,
        label: String,
        classes: Vec<ClassDescriptor>,
    },
    Lookup(LookupQuery),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Store(ObjectId),
    Call {
        result: Value,
        server_seconds: f64,
    },
    GetAttr(Value),
    SetAttr,
    Move,
    Replicate,
    FetchObject,
    Health {
        uptime_seconds: f64,
    },
    Metrics(Value),
    RegisterBackend(BackendId),
    Lookup(LookupAnswer),
    Error(RemoteError),
}

impl Request {
    pub fn msg_type(&self) -> u8 {
        use msg_type::*;
        match self {
            Request::Store(_) => STORE,
            Request::Call { .. } => CALL,
            Request::GetAttr { .. } => GET_ATTR,
            Request::SetAttr { .. } => SET_ATTR,
            Request::Move { .. } => MOVE,
            Request::Replicate { .. } => REPLICATE,
            Request::FetchObject { .. } => FETCH_OBJECT,
            Request::Health => HEALTH,
            Request::Metrics => METRICS,
            Request::RegisterBackend { .. } => REGISTER_BACKEND,
            Request::Lookup(_) => LOOKUP,
        }
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Request::Store(StoreBody::Object(obj)) => {
                codec::put_u8(&mut out, 0);
                obj.encode_into(&mut out);
            }
            Request::Store(StoreBody::Location(loc)) => {
                codec::put_u8(&mut out, 1);
                loc.encode_into(&mut out);
            }
            Request::Call {
                object_id,
                method,
                args,
            } => {
                out.extend_from_slice(object_id.as_bytes());
                codec::put_str(&mut out, method);
                codec::put_u32(&mut out, args.len() as u32);
                for a in args {
                    a.encode_into(&mut out);
                }
            }
            Request::GetAttr { object_id, name } => {
                out.extend_from_slice(object_id.as_bytes());
                codec::put_str(&mut out, name);
            }
            Request::SetAttr {
                object_id,
                name,
                value,
            } => {
                out.extend_from_slice(object_id.as_bytes());
                codec::put_str(&mut out, name);
                value.encode_into(&mut out);
            }
            Request::Move { object_id, target } | Request::Replicate { object_id, target } => {
                out.extend_from_slice(object_id.as_bytes());
                codec::put_u32(&mut out, target.0);
            }
            Request::FetchObject { role, object } => {
                codec::put_u8(&mut out, matches!(role, ObjectRole::Replica) as u8);
                object.encode_into(&mut out);
            }
            Request::Health | Request::Metrics => {}
            Request::RegisterBackend {
                address,
                label,
                classes,
            } => {
                codec::put_str(&mut out, address);
                codec::put_str(&mut out, label);
                codec::put_u32(&mut out, classes.len() as u32);
                for c in classes {
                    c.encode_into(&mut out);
                }
            }
            Request::Lookup(q) => match q {
                LookupQuery::Object(id) => {
                    codec::put_u8(&mut out, 0);
                    out.extend_from_slice(id.as_bytes());
                }
                LookupQuery::Class(name) => {
                    codec::put_u8(&mut out, 1);
                    codec::put_str(&mut out, name);
                }
                LookupQuery::Backends => codec::put_u8(&mut out, 2),
            },
        }
        out
    }

    pub fn decode(msg_type: u8, payload: &[u8]) -> Result<Request, WireError> {
        let mut r = Reader::new(payload);
        let req = match msg_type {
            msg_type::STORE => match r.u8("store kind")? {
                0 => Request::Store(StoreBody::Object(SerializedObject::decode_from(&mut r)?)),
                1 => Request::Store(StoreBody::Location(ObjectLocationRecord::decode_from(
                    &mut r,
                )?)),
                k => {
                    return Err(DecodeError::new(0, format!("unknown store kind {k}")).into());
                }
            },
            msg_type::CALL => {
                let object_id = read_object_id(&mut r)?;
                let method = r.str("method name")?;
                let argc = r.u32("arg count")? as usize;
                let mut args = Vec::with_capacity(argc.min(1024));
                for _ in 0..argc {
                    args.push(Value::decode_from(&mut r)?);
                }
                Request::Call {
                    object_id,
                    method,
                    args,
                }
            }
            msg_type::GET_ATTR => Request::GetAttr {
                object_id: read_object_id(&mut r)?,
                name: r.str("attribute name")?,
            },
            msg_type::SET_ATTR => Request::SetAttr {
                object_id: read_object_id(&mut r)?,
                name: r.str("attribute name")?,
                value: Value::decode_from(&mut r)?,
            },
            msg_type::MOVE => Request::Move {
                object_id: read_object_id(&mut r)?,
                target: BackendId(r.u32("target backend")?),
            },
            msg_type::REPLICATE => Request::Replicate {
                object_id: read_object_id(&mut r)?,
                target: BackendId(r.u32("target backend")?),
            },
            msg_type::FETCH_OBJECT => {
                let role = match r.u8("object role")? {
                    0 => ObjectRole::Primary,
                    _ => ObjectRole::Replica,
                };
                Request::FetchObject {
                    role,
                    object: SerializedObject::decode_from(&mut r)?,
                }
            }
            msg_type::HEALTH => Request::Health,
            msg_type::METRICS => Request::Metrics,
            msg_type::REGISTER_BACKEND => {
                let address = r.str("address")?;
                let label = r.str("label")?;
                let count = r.u32("class count")? as usize;
                let mut classes = Vec::with_capacity(count.min(1024));
                for _ in 0..count {
                    classes.push(ClassDescriptor::decode_from(&mut r)?);
                }
                Request::RegisterBackend {
                    address,
                    label,
                    classes,
                }
            }
            msg_type::LOOKUP => Request::Lookup(match r.u8("lookup kind")? {
                0 => LookupQuery::Object(read_object_id(&mut r)?),
                1 => LookupQuery::Class(r.str("class name")?),
                2 => LookupQuery::Backends,
                k => {
                    return Err(DecodeError::new(0, format!("unknown lookup kind {k}")).into());
                }
            }),
            other => return Err(WireError::UnsupportedMessage(other)),
        };
        r.expect_end()?;
        Ok(req)
    }
}

impl Response {
    pub fn msg_type(&self) -> u8 {
        use msg_type::*;
        match self {
            Response::Store(_) => STORE | RESPONSE_BIT,
            Response::Call { .. } => CALL | RESPONSE_BIT,
            Response::GetAttr(_) => GET_ATTR | RESPONSE_BIT,
            Response::SetAttr => SET_ATTR | RESPONSE_BIT,
            Response::Move => MOVE | RESPONSE_BIT,
            Response::Replicate => REPLICATE | RESPONSE_BIT,
            Response::FetchObject => FETCH_OBJECT | RESPONSE_BIT,
            Response::Health { .. } => HEALTH | RESPONSE_BIT,
            Response::Metrics(_) => METRICS | RESPONSE_BIT,
            Response::RegisterBackend(_) => REGISTER_BACKEND | RESPONSE_BIT,
            Response::Lookup(_) => LOOKUP | RESPONSE_BIT,
            Response::Error(_) => ERROR,
        }
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Response::Store(id) => out.extend_from_slice(id.as_bytes()),
            Response::Call {
                result,
                server_seconds,
            } => {
                codec::put_f64(&mut out, *server_seconds);
                result.encode_into(&mut out);
            }
            Response::GetAttr(v) => v.encode_into(&mut out),
            Response::SetAttr | Response::Move | Response::Replicate | Response::FetchObject => {}
            Response::Health { uptime_seconds } => codec::put_f64(&mut out, *uptime_seconds),
            Response::Metrics(v) => v.encode_into(&mut out),
            Response::RegisterBackend(id) => codec::put_u32(&mut out, id.0),
            Response::Lookup(answer) => match answer {
                LookupAnswer::Object(loc) => {
                    codec::put_u8(&mut out, 0);
                    loc.encode_into(&mut out);
                }
                LookupAnswer::Class(desc) => {
                    codec::put_u8(&mut out, 1);
                    desc.encode_into(&mut out);
                }
                LookupAnswer::Backends(list) => {
                    codec::put_u8(&mut out, 2);
                    codec::put_u32(&mut out, list.len() as u32);
                    for b in list {
                        b.encode_into(&mut out);
                    }
                }
            },
            Response::Error(e) => {
                codec::put_u16(&mut out, e.code as u16);
                codec::put_u32(&mut out, e.origin_backend.0);
                codec::put_u32(&mut out, e.redirect_to.map_or(0, |b| b.0));
                codec::put_str(&mut out, &e.message);
            }
        }
        out
    }

    /// `msg_type` must be the response counterpart of `request_type`, or
    /// ERROR.
    pub fn decode(
        request_type: u8,
        msg_type: u8,
        payload: &[u8],
    ) -> Result<Response, WireError> {
        if msg_type == msg_type::ERROR {
            let mut r = Reader::new(payload);
            let at = r.position();
            let raw_code = r.u16("error code")?;
            let code = ErrorCode::from_u16(raw_code)
                .ok_or_else(|| DecodeError::new(at, format!("unknown error code {raw_code}")))?;
            let origin_backend = BackendId(r.u32("origin backend")?);
            let redirect_raw = r.u32("redirect target")?;
            let message = r.str("error message")?;
            r.expect_end()?;
            return Ok(Response::Error(RemoteError {
                code,
                origin_backend,
                redirect_to: (redirect_raw != 0).then_some(BackendId(redirect_raw)),
                message,
            }));
        }
        if msg_type != request_type | msg_type::RESPONSE_BIT {
            return Err(WireError::UnsupportedMessage(msg_type));
        }
        let mut r = Reader::new(payload);
        let resp = match request_type {
            msg_type::STORE => Response::Store(read_object_id(&mut r)?),
            msg_type::CALL => Response::Call {
                server_seconds: r.f64("server seconds")?,
                result: Value::decode_from(&mut r)?,
            },
            msg_type::GET_ATTR => Response::GetAttr(Value::decode_from(&mut r)?),
            msg_type::SET_ATTR => Response::SetAttr,
            msg_type::MOVE => Response::Move,
            msg_type::REPLICATE => Response::Replicate,
            msg_type::FETCH_OBJECT => Response::FetchObject,
            msg_type::HEALTH => Response::Health {
                uptime_seconds: r.f64("uptime")?,
            },
            msg_type::METRICS => Response::Metrics(Value::decode_from(&mut r)?),
            msg_type::REGISTER_BACKEND => {
                Response::RegisterBackend(BackendId(r.u32("backend id")?))
            }
            msg_type::LOOKUP => Response::Lookup(match r.u8("lookup kind")? {
                0 => LookupAnswer::Object(ObjectLocationRecord::decode_from(&mut r)?),
                1 => LookupAnswer::Class(ClassDescriptor::decode_from(&mut r)?),
                2 => {
                    let count = r.u32("backend count")? as usize;
                    let mut list = Vec::with_capacity(count.min(1024));
                    for _ in 0..count {
                        list.push(BackendRecord::decode_from(&mut r)?);
                    }
                    LookupAnswer::Backends(list)
                }
                k => {
                    return Err(DecodeError::new(0, format!("unknown lookup kind {k}")).into());
                }
            }),
            other => return Err(WireError::UnsupportedMessage(other)),
        };
        r.expect_end()?;
        Ok(resp)
    }

    /// Turn an ERROR response into `Err(RemoteError)`.
    pub fn into_result(self) -> Result<Response, RemoteError> {
        match self {
            Response::Error(e) => Err(e),
            ok => Ok(ok),
        }
    }
}

fn read_object_id(r: &mut Reader<'_>) -> Result<ObjectId, DecodeError> {
    let raw = r.raw(16, "object id")?;
    Ok(ObjectId::from_bytes(raw.try_into().unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn call_with_float_args_round_trips() {
        let req = Request::Call {
            object_id: ObjectId::new_random(),
            method: "run".into(),
            args: vec![Value::Float(1.5), Value::Float(-2.0), Value::Float(0.0)],
        };
        let payload = req.encode_payload();
        let back = Request::decode(req.msg_type(), &payload).unwrap();
        assert_eq!(back, req);
    }

    #[test]
    fn error_response_round_trips() {
        let resp = Response::Error(RemoteError {
            code: ErrorCode::Redirect,
            origin_backend: BackendId(3),
            redirect_to: Some(BackendId(5)),
            message: "object moved".into(),
        });
        let payload = resp.encode_payload();
        let back = Response::decode(msg_type::CALL, msg_type::ERROR, &payload).unwrap();
        assert_eq!(back, resp);
    }

    #[test]
    fn mismatched_response_type_rejected() {
        let resp = Response::SetAttr;
        let payload = resp.encode_payload();
        let err = Response::decode(msg_type::CALL, resp.msg_type(), &payload).unwrap_err();
        assert!(matches!(err, WireError::UnsupportedMessage(_)));
    }

    #[test]
    fn unknown_request_type_rejected() {
        assert!(matches!(
            Request::decode(0x6E, &[]),
            Err(WireError::UnsupportedMessage(0x6E))
        ));
    }
}
