//! Simulated IP packets carried through the softwire data plane.
//!
//! Real header fidelity stops at the PPP protocol number: everything above
//! it is a structured record with a compact fixed binary encoding, enough
//! to give every packet a family, two addresses and a length that the MTU
//! and accounting machinery can chew on.
//!
//! Layout (all integers big-endian):
//!
//! ```text
//! +----+------+---------+---------+----------+------------+
//! | af | kind | src[16] | dst[16] | len: u16 | body[len]  |
//! +----+------+---------+---------+----------+------------+
//! ```
//!
//! IPv4 addresses occupy the first four bytes of the 16-byte field. Body
//! encodings per kind are defined next to their types below.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use thiserror::Error;

use crate::prefix::{Ipv4Prefix, Ipv6Prefix};
use crate::Af;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PacketError {
    #[error("truncated packet: {0}")]
    Truncated(&'static str),
    #[error("malformed packet: {0}")]
    Malformed(&'static str),
}

/// Router Advertisement content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouterAdvert {
    /// The /64 on-link prefix for address autoconfiguration.
    pub prefix: Ipv6Prefix,
    /// Managed flag: get your address via DHCPv6.
    pub managed: bool,
    /// Other-configuration flag: stateless DHCPv6 has more for you.
    pub other_config: bool,
}

/// One DHCPv6 message, client or server side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dhcpv6Message {
    pub msg_type: Dhcpv6MsgType,
    /// DHCP unique identifier of the client, compacted to 64 bits.
    pub duid: u64,
    /// Client asks for DNS in its option request.
    pub want_dns: bool,
    /// Prefix-delegation association, when the client is a router.
    pub ia_pd: Option<IaPd>,
    /// Address association, when RA advertised the managed flag.
    pub ia_na: Option<IaNa>,
    /// DNS servers (server messages).
    pub dns: Vec<Ipv6Addr>,
    pub status: Dhcpv6Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dhcpv6MsgType {
    Solicit = 1,
    Advertise = 2,
    Request = 3,
    Reply = 7,
    InformationRequest = 11,
}

impl Dhcpv6MsgType {
    fn from_u8(v: u8) -> Option<Dhcpv6MsgType> {
        Some(match v {
            1 => Dhcpv6MsgType::Solicit,
            2 => Dhcpv6MsgType::Advertise,
            3 => Dhcpv6MsgType::Request,
            7 => Dhcpv6MsgType::Reply,
            11 => Dhcpv6MsgType::InformationRequest,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[repr(u8)]
pub enum Dhcpv6Status {
    #[default]
    Success = 0,
    NoPrefixAvail = 6,
}

/// Identity association for prefix delegation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IaPd {
    /// Prefix the client hints at (renewal), if any.
    pub hint: Option<Ipv6Prefix>,
    /// Prefix the server delegates.
    pub delegated: Option<Ipv6Prefix>,
}

/// Identity association for a non-temporary address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IaNa {
    pub address: Option<Ipv6Addr>,
}

/// Subnet-Request suboption fields for DHCPv4 subnet allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubnetRequest {
    /// Client will run the DHCP server function on the subnet.
    pub h: bool,
    /// Information flag: a prior Subnet-Information suboption follows.
    pub i: bool,
    /// 0 = any; otherwise the longest prefix length the client supports.
    pub prefix_len: u8,
    /// Previously assigned prefix on renewal.
    pub prior: Option<SubnetInfo>,
}

/// Subnet-Information suboption contents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubnetInfo {
    pub prefix: Ipv4Prefix,
    pub c: bool,
    pub s: bool,
}

/// One DHCPv4 message, subnet allocation flavor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dhcpv4Message {
    pub msg_type: Dhcpv4MsgType,
    pub client_id: u64,
    pub subnet_request: Option<SubnetRequest>,
    /// Prefix delegated by the server.
    pub subnet_reply: Option<Ipv4Prefix>,
    pub dns: Vec<Ipv4Addr>,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dhcpv4MsgType {
    Request = 3,
    Ack = 5,
    Nak = 6,
}

impl Dhcpv4MsgType {
    fn from_u8(v: u8) -> Option<Dhcpv4MsgType> {
        Some(match v {
            3 => Dhcpv4MsgType::Request,
            5 => Dhcpv4MsgType::Ack,
            6 => Dhcpv4MsgType::Nak,
            _ => return None,
        })
    }
}

/// What a simulated packet carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PacketKind {
    /// Opaque payload traffic.
    Data(Vec<u8>),
    RouterSolicit,
    RouterAdvert(RouterAdvert),
    /// Duplicate address detection probe for the target address.
    NeighborSolicit(Ipv6Addr),
    /// Defense: the sender owns the target address.
    NeighborAdvert(Ipv6Addr),
    Dhcpv6(Dhcpv6Message),
    Dhcpv4(Dhcpv4Message),
}

impl PacketKind {
    fn tag(&self) -> u8 {
        match self {
            PacketKind::Data(_) => 0,
            PacketKind::RouterSolicit => 1,
            PacketKind::RouterAdvert(_) => 2,
            PacketKind::NeighborSolicit(_) => 3,
            PacketKind::NeighborAdvert(_) => 4,
            PacketKind::Dhcpv6(_) => 5,
            PacketKind::Dhcpv4(_) => 6,
        }
    }
}

/// A simulated IP packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimPacket {
    pub af: Af,
    pub src: IpAddr,
    pub dst: IpAddr,
    pub kind: PacketKind,
}

impl SimPacket {
    pub fn data(af: Af, src: IpAddr, dst: IpAddr, payload: Vec<u8>) -> SimPacket {
        SimPacket {
            af,
            src,
            dst,
            kind: PacketKind::Data(payload),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let body = encode_body(&self.kind);
        let mut out = Vec::with_capacity(36 + body.len());
        out.push(match self.af {
            Af::V4 => 4,
            Af::V6 => 6,
        });
        out.push(self.kind.tag());
        out.extend_from_slice(&addr_bytes(self.src));
        out.extend_from_slice(&addr_bytes(self.dst));
        out.extend_from_slice(&(body.len() as u16).to_be_bytes());
        out.extend_from_slice(&body);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<SimPacket, PacketError> {
        if buf.len() < 36 {
            return Err(PacketError::Truncated("packet header"));
        }
        let af = match buf[0] {
            4 => Af::V4,
            6 => Af::V6,
            _ => return Err(PacketError::Malformed("address family")),
        };
        let tag = buf[1];
        let src = addr_from_bytes(af, &buf[2..18]);
        let dst = addr_from_bytes(af, &buf[18..34]);
        let len = u16::from_be_bytes([buf[34], buf[35]]) as usize;
        if buf.len() < 36 + len {
            return Err(PacketError::Truncated("packet body"));
        }
        let body = &buf[36..36 + len];
        let kind = decode_body(tag, body)?;
        Ok(SimPacket { af, src, dst, kind })
    }
}

fn addr_bytes(addr: IpAddr) -> [u8; 16] {
    let mut out = [0u8; 16];
    match addr {
        IpAddr::V4(a) => out[..4].copy_from_slice(&a.octets()),
        IpAddr::V6(a) => out.copy_from_slice(&a.octets()),
    }
    out
}

fn addr_from_bytes(af: Af, bytes: &[u8]) -> IpAddr {
    match af {
        Af::V4 => IpAddr::V4(Ipv4Addr::new(bytes[0], bytes[1], bytes[2], bytes[3])),
        Af::V6 => {
            let mut a = [0u8; 16];
            a.copy_from_slice(bytes);
            IpAddr::V6(Ipv6Addr::from(a))
        }
    }
}

fn push_v6_prefix(out: &mut Vec<u8>, prefix: &Ipv6Prefix) {
    out.extend_from_slice(&prefix.addr().octets());
    out.push(prefix.len());
}

fn read_v6_prefix(buf: &[u8]) -> Result<(Ipv6Prefix, &[u8]), PacketError> {
    if buf.len() < 17 {
        return Err(PacketError::Truncated("v6 prefix"));
    }
    let mut octets = [0u8; 16];
    octets.copy_from_slice(&buf[..16]);
    let prefix = Ipv6Prefix::new(Ipv6Addr::from(octets), buf[16])
        .map_err(|_| PacketError::Malformed("v6 prefix"))?;
    Ok((prefix, &buf[17..]))
}

fn push_v4_prefix(out: &mut Vec<u8>, prefix: &Ipv4Prefix) {
    out.extend_from_slice(&prefix.addr().octets());
    out.push(prefix.len());
}

fn read_v4_prefix(buf: &[u8]) -> Result<(Ipv4Prefix, &[u8]), PacketError> {
    if buf.len() < 5 {
        return Err(PacketError::Truncated("v4 prefix"));
    }
    let prefix = Ipv4Prefix::new(Ipv4Addr::new(buf[0], buf[1], buf[2], buf[3]), buf[4])
        .map_err(|_| PacketError::Malformed("v4 prefix"))?;
    Ok((prefix, &buf[5..]))
}

fn encode_body(kind: &PacketKind) -> Vec<u8> {
    let mut out = Vec::new();
    match kind {
        PacketKind::Data(payload) => out.extend_from_slice(payload),
        PacketKind::RouterSolicit => {}
        PacketKind::RouterAdvert(ra) => {
            push_v6_prefix(&mut out, &ra.prefix);
            let mut flags = 0u8;
            if ra.managed {
                flags |= 0x01;
            }
            if ra.other_config {
                flags |= 0x02;
            }
            out.push(flags);
        }
        PacketKind::NeighborSolicit(target) | PacketKind::NeighborAdvert(target) => {
            out.extend_from_slice(&target.octets());
        }
        PacketKind::Dhcpv6(msg) => {
            out.push(msg.msg_type as u8);
            out.extend_from_slice(&msg.duid.to_be_bytes());
            let mut flags = 0u8;
            if msg.want_dns {
                flags |= 0x01;
            }
            if msg.ia_pd.is_some() {
                flags |= 0x02;
            }
            if msg.ia_na.is_some() {
                flags |= 0x04;
            }
            out.push(flags);
            out.push(msg.status as u8);
            if let Some(ia_pd) = &msg.ia_pd {
                push_opt_v6_prefix(&mut out, &ia_pd.hint);
                push_opt_v6_prefix(&mut out, &ia_pd.delegated);
            }
            if let Some(ia_na) = &msg.ia_na {
                match ia_na.address {
                    Some(addr) => {
                        out.push(1);
                        out.extend_from_slice(&addr.octets());
                    }
                    None => out.push(0),
                }
            }
            out.push(msg.dns.len() as u8);
            for dns in &msg.dns {
                out.extend_from_slice(&dns.octets());
            }
        }
        PacketKind::Dhcpv4(msg) => {
            out.push(msg.msg_type as u8);
            out.extend_from_slice(&msg.client_id.to_be_bytes());
            out.push(u8::from(msg.ok));
            match &msg.subnet_request {
                Some(req) => {
                    out.push(1);
                    let mut flags = 0u8;
                    if req.h {
                        flags |= 0x01;
                    }
                    if req.i {
                        flags |= 0x02;
                    }
                    out.push(flags);
                    out.push(req.prefix_len);
                    match &req.prior {
                        Some(info) => {
                            out.push(1);
                            push_v4_prefix(&mut out, &info.prefix);
                            let mut iflags = 0u8;
                            if info.c {
                                iflags |= 0x01;
                            }
                            if info.s {
                                iflags |= 0x02;
                            }
                            out.push(iflags);
                        }
                        None => out.push(0),
                    }
                }
                None => out.push(0),
            }
            match &msg.subnet_reply {
                Some(prefix) => {
                    out.push(1);
                    push_v4_prefix(&mut out, prefix);
                }
                None => out.push(0),
            }
            out.push(msg.dns.len() as u8);
            for dns in &msg.dns {
                out.extend_from_slice(&dns.octets());
            }
        }
    }
    out
}

fn push_opt_v6_prefix(out: &mut Vec<u8>, prefix: &Option<Ipv6Prefix>) {
    match prefix {
        Some(p) => {
            out.push(1);
            push_v6_prefix(out, p);
        }
        None => out.push(0),
    }
}

fn read_opt_v6_prefix(buf: &[u8]) -> Result<(Option<Ipv6Prefix>, &[u8]), PacketError> {
    match buf.first() {
        Some(0) => Ok((None, &buf[1..])),
        Some(1) => {
            let (prefix, rest) = read_v6_prefix(&buf[1..])?;
            Ok((Some(prefix), rest))
        }
        _ => Err(PacketError::Malformed("option marker")),
    }
}

fn decode_body(tag: u8, body: &[u8]) -> Result<PacketKind, PacketError> {
    match tag {
        0 => Ok(PacketKind::Data(body.to_vec())),
        1 => Ok(PacketKind::RouterSolicit),
        2 => {
            let (prefix, rest) = read_v6_prefix(body)?;
            let flags = *rest.first().ok_or(PacketError::Truncated("RA flags"))?;
            Ok(PacketKind::RouterAdvert(RouterAdvert {
                prefix,
                managed: flags & 0x01 != 0,
                other_config: flags & 0x02 != 0,
            }))
        }
        3 | 4 => {
            if body.len() < 16 {
                return Err(PacketError::Truncated("neighbor target"));
            }
            let mut octets = [0u8; 16];
            octets.copy_from_slice(&body[..16]);
            let target = Ipv6Addr::from(octets);
            Ok(if tag == 3 {
                PacketKind::NeighborSolicit(target)
            } else {
                PacketKind::NeighborAdvert(target)
            })
        }
        5 => {
            if body.len() < 11 {
                return Err(PacketError::Truncated("dhcpv6 header"));
            }
            let msg_type =
                Dhcpv6MsgType::from_u8(body[0]).ok_or(PacketError::Malformed("dhcpv6 type"))?;
            let duid = u64::from_be_bytes(body[1..9].try_into().unwrap());
            let flags = body[9];
            let status = match body[10] {
                0 => Dhcpv6Status::Success,
                6 => Dhcpv6Status::NoPrefixAvail,
                _ => return Err(PacketError::Malformed("dhcpv6 status")),
            };
            let mut rest = &body[11..];
            let ia_pd = if flags & 0x02 != 0 {
                let (hint, r) = read_opt_v6_prefix(rest)?;
                let (delegated, r) = read_opt_v6_prefix(r)?;
                rest = r;
                Some(IaPd { hint, delegated })
            } else {
                None
            };
            let ia_na = if flags & 0x04 != 0 {
                let marker = *rest.first().ok_or(PacketError::Truncated("ia_na"))?;
                rest = &rest[1..];
                let address = if marker == 1 {
                    if rest.len() < 16 {
                        return Err(PacketError::Truncated("ia_na address"));
                    }
                    let mut octets = [0u8; 16];
                    octets.copy_from_slice(&rest[..16]);
                    rest = &rest[16..];
                    Some(Ipv6Addr::from(octets))
                } else {
                    None
                };
                Some(IaNa { address })
            } else {
                None
            };
            let count = *rest.first().ok_or(PacketError::Truncated("dns count"))? as usize;
            rest = &rest[1..];
            if rest.len() < count * 16 {
                return Err(PacketError::Truncated("dns list"));
            }
            let mut dns = Vec::with_capacity(count);
            for i in 0..count {
                let mut octets = [0u8; 16];
                octets.copy_from_slice(&rest[i * 16..(i + 1) * 16]);
                dns.push(Ipv6Addr::from(octets));
            }
            Ok(PacketKind::Dhcpv6(Dhcpv6Message {
                msg_type,
                duid,
                want_dns: flags & 0x01 != 0,
                ia_pd,
                ia_na,
                dns,
                status,
            }))
        }
        6 => {
            if body.len() < 10 {
                return Err(PacketError::Truncated("dhcpv4 header"));
            }
            let msg_type =
                Dhcpv4MsgType::from_u8(body[0]).ok_or(PacketError::Malformed("dhcpv4 type"))?;
            let client_id = u64::from_be_bytes(body[1..9].try_into().unwrap());
            let ok = body[9] != 0;
            let mut rest = &body[10..];
            let marker = *rest.first().ok_or(PacketError::Truncated("subnet req"))?;
            rest = &rest[1..];
            let subnet_request = if marker == 1 {
                if rest.len() < 3 {
                    return Err(PacketError::Truncated("subnet req fields"));
                }
                let flags = rest[0];
                let prefix_len = rest[1];
                let has_prior = rest[2] == 1;
                rest = &rest[3..];
                let prior = if has_prior {
                    let (prefix, r) = read_v4_prefix(rest)?;
                    let iflags = *r.first().ok_or(PacketError::Truncated("subnet info"))?;
                    rest = &r[1..];
                    Some(SubnetInfo {
                        prefix,
                        c: iflags & 0x01 != 0,
                        s: iflags & 0x02 != 0,
                    })
                } else {
                    None
                };
                Some(SubnetRequest {
                    h: flags & 0x01 != 0,
                    i: flags & 0x02 != 0,
                    prefix_len,
                    prior,
                })
            } else {
                None
            };
            let marker = *rest.first().ok_or(PacketError::Truncated("subnet reply"))?;
            rest = &rest[1..];
            let subnet_reply = if marker == 1 {
                let (prefix, r) = read_v4_prefix(rest)?;
                rest = r;
                Some(prefix)
            } else {
                None
            };
            let count = *rest.first().ok_or(PacketError::Truncated("dns count"))? as usize;
            rest = &rest[1..];
            if rest.len() < count * 4 {
                return Err(PacketError::Truncated("dns list"));
            }
            let mut dns = Vec::with_capacity(count);
            for i in 0..count {
                dns.push(Ipv4Addr::new(
                    rest[i * 4],
                    rest[i * 4 + 1],
                    rest[i * 4 + 2],
                    rest[i * 4 + 3],
                ));
            }
            Ok(PacketKind::Dhcpv4(Dhcpv4Message {
                msg_type,
                client_id,
                subnet_request,
                subnet_reply,
                dns,
                ok,
            }))
        }
        _ => Err(PacketError::Malformed("unknown packet kind")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v6(s: &str) -> IpAddr {
        s.parse().unwrap()
    }

    #[test]
    fn data_roundtrip() {
        let pkt = SimPacket::data(Af::V6, v6("2001:db8::1"), v6("2001:db8::2"), vec![9; 100]);
        let bytes = pkt.encode();
        assert_eq!(bytes.len(), 36 + 100);
        assert_eq!(SimPacket::decode(&bytes).unwrap(), pkt);
    }

    #[test]
    fn ra_roundtrip() {
        let pkt = SimPacket {
            af: Af::V6,
            src: v6("fe80::1"),
            dst: v6("fe80::2"),
            kind: PacketKind::RouterAdvert(RouterAdvert {
                prefix: "2001:db8:1::/64".parse().unwrap(),
                managed: true,
                other_config: false,
            }),
        };
        assert_eq!(SimPacket::decode(&pkt.encode()).unwrap(), pkt);
    }

    #[test]
    fn dhcpv6_roundtrip_with_ia_pd() {
        let pkt = SimPacket {
            af: Af::V6,
            src: v6("fe80::1"),
            dst: v6("fe80::2"),
            kind: PacketKind::Dhcpv6(Dhcpv6Message {
                msg_type: Dhcpv6MsgType::Reply,
                duid: 0xABCD,
                want_dns: true,
                ia_pd: Some(IaPd {
                    hint: None,
                    delegated: Some("2001:db8:100::/48".parse().unwrap()),
                }),
                ia_na: Some(IaNa {
                    address: Some("2001:db8:1::100".parse().unwrap()),
                }),
                dns: vec!["2001:db8:53::53".parse().unwrap()],
                status: Dhcpv6Status::Success,
            }),
        };
        assert_eq!(SimPacket::decode(&pkt.encode()).unwrap(), pkt);
    }

    #[test]
    fn dhcpv4_roundtrip_with_subnet_request() {
        let pkt = SimPacket {
            af: Af::V4,
            src: "198.51.100.1".parse().unwrap(),
            dst: "198.51.100.254".parse().unwrap(),
            kind: PacketKind::Dhcpv4(Dhcpv4Message {
                msg_type: Dhcpv4MsgType::Request,
                client_id: 7,
                subnet_request: Some(SubnetRequest {
                    h: true,
                    i: true,
                    prefix_len: 28,
                    prior: Some(SubnetInfo {
                        prefix: "198.51.100.0/28".parse().unwrap(),
                        c: false,
                        s: false,
                    }),
                }),
                subnet_reply: None,
                dns: vec![],
                ok: true,
            }),
        };
        assert_eq!(SimPacket::decode(&pkt.encode()).unwrap(), pkt);
    }

    #[test]
    fn dad_probe_roundtrip() {
        let pkt = SimPacket {
            af: Af::V6,
            src: v6("::"),
            dst: v6("ff02::1"),
            kind: PacketKind::NeighborSolicit("2001:db8:1::1".parse().unwrap()),
        };
        assert_eq!(SimPacket::decode(&pkt.encode()).unwrap(), pkt);
    }

    #[test]
    fn truncation_detected() {
        let pkt = SimPacket::data(
            Af::V4,
            "10.0.0.1".parse().unwrap(),
            "10.0.0.2".parse().unwrap(),
            vec![1, 2, 3],
        );
        let bytes = pkt.encode();
        assert!(SimPacket::decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(SimPacket::decode(&bytes[..10]).is_err());
    }
}
