//! Property tests: codec round-trips, NAT filtering monotonicity,
//! delegation length bounds and stable-store behavior.

use proptest::prelude::*;

use softwire::netsim::nat::{FilterReason, Filtering, NatBox, NatConfig};
use softwire::prefix::{Ipv4Prefix, Ipv6Prefix};
use softwire::provisioning::pool::{V4PrefixPool, V6PrefixPool};
use softwire::provisioning::{Assignment, StablePolicy, StableStore};
use softwire::time::{Duration, SimTime};
use softwire::wire::{Avp, AvpType, ControlMessage, MessageType, PppFrame, PppProtocol};

fn arb_message_type() -> impl Strategy<Value = MessageType> {
    prop_oneof![
        Just(MessageType::Sccrq),
        Just(MessageType::Sccrp),
        Just(MessageType::Scccn),
        Just(MessageType::StopCcn),
        Just(MessageType::Hello),
        Just(MessageType::Icrq),
        Just(MessageType::Icrp),
        Just(MessageType::Iccn),
        Just(MessageType::Cdn),
    ]
}

prop_compose! {
    fn arb_avp()(
        mandatory in any::<bool>(),
        vendor in prop_oneof![Just(0u16), 1..=u16::MAX],
        attribute in 0u16..=60,
        value in proptest::collection::vec(any::<u8>(), 0..64),
    ) -> Avp {
        // Unknown AVPs must not be mandatory or the decoder (correctly)
        // refuses the whole message.
        let known = vendor == 0 && AvpType::from_u16(attribute).is_some();
        Avp {
            mandatory: mandatory && known,
            hidden: false,
            vendor_id: vendor,
            attribute_type: attribute,
            value,
        }
    }
}

prop_compose! {
    fn arb_control_message()(
        mt in arb_message_type(),
        tunnel in any::<u16>(),
        ns in any::<u16>(),
        nr in any::<u16>(),
        avps in proptest::collection::vec(arb_avp(), 0..8),
    ) -> ControlMessage {
        ControlMessage::new(tunnel, ns, nr, mt, avps)
    }
}

proptest! {
    /// Decode inverts encode for any syntactically valid control message.
    #[test]
    fn control_message_roundtrip(msg in arb_control_message()) {
        let bytes = msg.encode().unwrap();
        let decoded = ControlMessage::decode(&bytes).unwrap();
        // The encoder fills in the header length; compare against the
        // re-encoded form for full value equality.
        prop_assert_eq!(decoded.message_type, msg.message_type);
        prop_assert_eq!(&decoded.avps, &msg.avps);
        prop_assert_eq!(decoded.encode().unwrap(), bytes);
    }

    /// Bare PPP frames round-trip for every carried protocol.
    #[test]
    fn ppp_frame_roundtrip(
        proto in prop_oneof![
            Just(PppProtocol::Ipv4),
            Just(PppProtocol::Ipv6),
            Just(PppProtocol::Lcp),
            Just(PppProtocol::Chap),
            Just(PppProtocol::Ipcp),
            Just(PppProtocol::Ipv6cp),
        ],
        payload in proptest::collection::vec(any::<u8>(), 0..256),
    ) {
        let frame = PppFrame::new(proto, payload);
        prop_assert_eq!(PppFrame::decode(&frame.encode()).unwrap(), frame);
    }

    /// Any datagram passing the strictest filter passes the looser ones:
    /// APDF admits implies ADF admits implies EIF admits.
    #[test]
    fn nat_filtering_monotonicity(
        contacted in proptest::collection::vec((1u8..=200, 1u16..=9999), 1..6),
        remote_ip in 1u8..=200,
        remote_port in 1u16..=9999,
    ) {
        let internal = ("10.0.0.2".parse().unwrap(), 1701u16);
        let remote = (format!("192.0.2.{remote_ip}").parse().unwrap(), remote_port);
        let mut results = Vec::new();
        for filtering in [
            Filtering::AddressAndPortDependent,
            Filtering::AddressDependent,
            Filtering::EndpointIndependent,
        ] {
            let mut nat = NatBox::new(NatConfig {
                filtering,
                external_ip: "203.0.113.1".parse().unwrap(),
                inside: vec!["10.0.0.2".parse().unwrap()],
                binding_ttl: Duration::from_secs(120),
            });
            let mut external = (nat.external_ip(), 0);
            for (ip, port) in &contacted {
                let dst = (format!("192.0.2.{ip}").parse().unwrap(), *port);
                let (ext, _) = nat.outbound(internal, dst, SimTime::ZERO);
                external = ext;
            }
            let passed = !matches!(
                nat.inbound(external, remote, SimTime::from_millis(5)),
                Err(FilterReason::Filtered)
            );
            results.push(passed);
        }
        let (apdf, adf, eif) = (results[0], results[1], results[2]);
        prop_assert!(!apdf || adf, "APDF pass must imply ADF pass");
        prop_assert!(!adf || eif, "ADF pass must imply EIF pass");
        prop_assert!(eif, "EIF admits anything to a live binding");
    }

    /// Delegated prefix lengths outside the allowed windows are always
    /// refused at pool construction.
    #[test]
    fn v6_delegation_bounds(len in 0u8..=128) {
        let base: Ipv6Prefix = "2001:db8::/32".parse().unwrap();
        let ok = V6PrefixPool::delegation(base, len).is_ok();
        prop_assert_eq!(ok, (48..=64).contains(&len));
    }

    #[test]
    fn v4_delegation_bounds(len in 0u8..=32) {
        let base: Ipv4Prefix = "100.0.0.0/8".parse().unwrap();
        let ok = V4PrefixPool::delegation(base, len).is_ok();
        prop_assert_eq!(ok, (8..=30).contains(&len));
    }

    /// Any connect/disconnect/connect sequence at one concentrator sees
    /// identical assignments.
    #[test]
    fn stable_store_is_stable_per_concentrator(
        reconnects in 1usize..6,
        host in 0u64..=0xFFFF,
    ) {
        let mut store = StableStore::new(StablePolicy::PerConcentrator);
        let base: u128 = u128::from_be_bytes("2001:db8:1::".parse::<std::net::Ipv6Addr>().unwrap().octets());
        let first = Assignment {
            endpoint_v6: Some(std::net::Ipv6Addr::from(base | (u128::from(host) + 1))),
            ..Assignment::default()
        };
        store.commit("user1", "sc1", first, 0);
        for i in 0..reconnects {
            let seen = store.lookup("user1", "sc1");
            prop_assert_eq!(seen, Some(first));
            // Recommit what was found, as a real reconnect does.
            store.commit("user1", "sc1", seen.unwrap(), (i as u64 + 1) * 1000);
        }
        // A different concentrator starts fresh.
        prop_assert_eq!(store.lookup("user1", "sc2"), None);
    }
}
