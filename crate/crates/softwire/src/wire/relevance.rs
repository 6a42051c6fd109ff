//! Which AVPs belong on which control message in the single-session
//! voluntary profile.
//!
//! RFC 2661 allows a wide set of AVPs per message; a softwire uses only
//! the incoming-call flow with one session, so everything tied to
//! outgoing calls, telephony or proxied LCP/authentication has no business
//! on the wire here. Endpoints never send a `NotRelevant` AVP and ignore
//! one on receipt.

use super::avp::AvpType;
use super::l2tp::MessageType;

/// Classification of an AVP on a given message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relevance {
    /// Must be present on the message.
    Required,
    /// May be present and is acted upon.
    Optional,
    /// Never sent; ignored when received.
    NotRelevant,
}

/// Required AVPs for a message, in canonical emission order.
pub fn required_avps(msg: MessageType) -> &'static [AvpType] {
    match msg {
        MessageType::Sccrq => &[
            AvpType::MessageType,
            AvpType::ProtocolVersion,
            AvpType::HostName,
            AvpType::FramingCapabilities,
            AvpType::AssignedTunnelId,
        ],
        MessageType::Sccrp => &[
            AvpType::MessageType,
            AvpType::ProtocolVersion,
            AvpType::FramingCapabilities,
            AvpType::HostName,
            AvpType::AssignedTunnelId,
        ],
        MessageType::Scccn => &[AvpType::MessageType],
        MessageType::StopCcn => &[
            AvpType::MessageType,
            AvpType::AssignedTunnelId,
            AvpType::ResultCode,
        ],
        MessageType::Hello => &[AvpType::MessageType],
        MessageType::Icrq => &[
            AvpType::MessageType,
            AvpType::AssignedSessionId,
            AvpType::CallSerialNumber,
        ],
        MessageType::Icrp => &[AvpType::MessageType, AvpType::AssignedSessionId],
        MessageType::Iccn => &[
            AvpType::MessageType,
            AvpType::ConnectSpeed,
            AvpType::FramingType,
        ],
        MessageType::Cdn => &[
            AvpType::MessageType,
            AvpType::ResultCode,
            AvpType::AssignedSessionId,
        ],
        MessageType::Zlb | MessageType::Other(_) => &[],
    }
}

/// Optional AVPs used in this profile, per message.
pub fn optional_avps(msg: MessageType) -> &'static [AvpType] {
    match msg {
        MessageType::Sccrq => &[
            AvpType::ReceiveWindowSize,
            AvpType::Challenge,
            AvpType::FirmwareRevision,
            AvpType::VendorName,
        ],
        MessageType::Sccrp => &[
            AvpType::FirmwareRevision,
            AvpType::VendorName,
            AvpType::ReceiveWindowSize,
            AvpType::Challenge,
            AvpType::ChallengeResponse,
        ],
        MessageType::Scccn => &[AvpType::ChallengeResponse],
        _ => &[],
    }
}

/// Classify `attr` on message `msg`. Total: anything not in the Required
/// or Optional tables is NotRelevant.
pub fn classify_avp(msg: MessageType, attr: AvpType) -> Relevance {
    if required_avps(msg).contains(&attr) {
        Relevance::Required
    } else if optional_avps(msg).contains(&attr) {
        Relevance::Optional
    } else {
        Relevance::NotRelevant
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig_examples() {
        assert_eq!(
            classify_avp(MessageType::Sccrq, AvpType::HostName),
            Relevance::Required
        );
        assert_eq!(
            classify_avp(MessageType::Sccrq, AvpType::ReceiveWindowSize),
            Relevance::Optional
        );
        // Bearer Capabilities only matters for outgoing calls.
        assert_eq!(
            classify_avp(MessageType::Sccrq, AvpType::BearerCapabilities),
            Relevance::NotRelevant
        );
    }

    #[test]
    fn session_messages() {
        assert_eq!(
            classify_avp(MessageType::Icrq, AvpType::CallSerialNumber),
            Relevance::Required
        );
        assert_eq!(
            classify_avp(MessageType::Icrp, AvpType::AssignedSessionId),
            Relevance::Required
        );
        assert_eq!(
            classify_avp(MessageType::Iccn, AvpType::ConnectSpeed),
            Relevance::Required
        );
        assert_eq!(
            classify_avp(MessageType::Iccn, AvpType::FramingType),
            Relevance::Required
        );
        // Proxied LCP state belongs to the compulsory model.
        assert_eq!(
            classify_avp(MessageType::Iccn, AvpType::InitialReceivedLcpConfreq),
            Relevance::NotRelevant
        );
    }

    #[test]
    fn teardown_messages_follow_rfc2661_baseline() {
        assert_eq!(
            classify_avp(MessageType::StopCcn, AvpType::ResultCode),
            Relevance::Required
        );
        assert_eq!(
            classify_avp(MessageType::Cdn, AvpType::Q931CauseCode),
            Relevance::NotRelevant
        );
    }

    #[test]
    fn totality_over_registry() {
        // Every (message, known attribute) pair classifies without panic
        // and ZLB admits nothing.
        let messages = [
            MessageType::Sccrq,
            MessageType::Sccrp,
            MessageType::Scccn,
            MessageType::StopCcn,
            MessageType::Hello,
            MessageType::Icrq,
            MessageType::Icrp,
            MessageType::Iccn,
            MessageType::Cdn,
            MessageType::Zlb,
            MessageType::Other(99),
        ];
        for msg in messages {
            for attr in 0..=39u16 {
                if let Some(t) = AvpType::from_u16(attr) {
                    let _ = classify_avp(msg, t);
                    if matches!(msg, MessageType::Zlb | MessageType::Other(_)) {
                        assert_eq!(classify_avp(msg, t), Relevance::NotRelevant);
                    }
                }
            }
        }
    }

    #[test]
    fn challenge_is_optional_on_both_start_messages() {
        assert_eq!(
            classify_avp(MessageType::Sccrq, AvpType::Challenge),
            Relevance::Optional
        );
        assert_eq!(
            classify_avp(MessageType::Sccrp, AvpType::ChallengeResponse),
            Relevance::Optional
        );
        assert_eq!(
            classify_avp(MessageType::Scccn, AvpType::ChallengeResponse),
            Relevance::Optional
        );
    }
}
