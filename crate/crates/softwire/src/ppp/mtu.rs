//! MTU arithmetic for PPP presented to the softwire payload.
//!
//! The PPP MTU is the access-link MTU minus every encapsulation header on
//! the way down: transport IP, UDP, the L2TP data header (with its Length
//! field) and the PPP framing itself. Address/control-field compression
//! shaves the 0xFF03 bytes off the PPP overhead, nothing else.

use thiserror::Error;

use crate::Af;

/// UDP header.
pub const UDP_HEADER: u32 = 8;
/// L2TP data header carrying the Length field.
pub const L2TP_DATA_HEADER: u32 = 8;
/// PPP overhead without ACFC: address/control 0xFF03 plus protocol.
pub const PPP_OVERHEAD: u32 = 4;
/// PPP overhead with ACFC: protocol field only.
pub const PPP_OVERHEAD_ACFC: u32 = 2;
/// Minimum usable result (the IPv4 minimum link MTU).
pub const MIN_PPP_MTU: u32 = 68;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MtuError {
    #[error("link MTU {link_mtu} leaves a PPP MTU of {result}, below the minimum {MIN_PPP_MTU}")]
    MtuTooSmall { link_mtu: u32, result: u32 },
}

/// PPP MTU presented to the payload for a given access-link MTU and
/// transport family.
pub fn compute_ppp_mtu(link_mtu: u32, transport_af: Af, acfc: bool) -> Result<u32, MtuError> {
    let ppp = if acfc {
        PPP_OVERHEAD_ACFC
    } else {
        PPP_OVERHEAD
    };
    let overhead = transport_af.header_len() + UDP_HEADER + L2TP_DATA_HEADER + ppp;
    let result = link_mtu.saturating_sub(overhead);
    if result < MIN_PPP_MTU {
        return Err(MtuError::MtuTooSmall { link_mtu, result });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ipv4_1500_gives_1460() {
        assert_eq!(compute_ppp_mtu(1500, Af::V4, false), Ok(1460));
    }

    #[test]
    fn ipv6_1500_matches_independent_ledger() {
        // Sum the headers by hand: 40 (IPv6) + 8 (UDP) + 8 (L2TP) + 4 (PPP).
        let ledger: u32 = 40 + 8 + 8 + 4;
        assert_eq!(ledger, 60);
        assert_eq!(compute_ppp_mtu(1500, Af::V6, false), Ok(1500 - ledger));
        assert_eq!(compute_ppp_mtu(1500, Af::V6, false), Ok(1440));
    }

    #[test]
    fn acfc_buys_two_bytes() {
        assert_eq!(compute_ppp_mtu(1500, Af::V4, true), Ok(1462));
    }

    #[test]
    fn tiny_link_is_rejected() {
        assert_eq!(
            compute_ppp_mtu(100, Af::V4, false),
            Err(MtuError::MtuTooSmall {
                link_mtu: 100,
                result: 60
            })
        );
    }

    #[test]
    fn strictly_decreasing_in_each_component() {
        // Larger transport header, no ACFC, both shrink the result.
        let v4 = compute_ppp_mtu(1500, Af::V4, false).unwrap();
        let v6 = compute_ppp_mtu(1500, Af::V6, false).unwrap();
        assert!(v6 < v4);
        let with_acfc = compute_ppp_mtu(1500, Af::V4, true).unwrap();
        assert!(v4 < with_acfc);
        for link in [600, 1000, 1492, 1500, 9000] {
            let a = compute_ppp_mtu(link, Af::V4, false).unwrap();
            let b = compute_ppp_mtu(link + 1, Af::V4, false).unwrap();
            assert_eq!(b, a + 1);
        }
    }
}
