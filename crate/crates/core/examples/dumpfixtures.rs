// Emits the golden frame fixtures in the tests/data format.

use tsnbridge_core::frames::*;
use tsnbridge_core::simkernel::SimTime;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn main() {
    let sync = GptpMessage {
        message_type: GptpMessageType::Sync,
        sequence_id: 5,
        correction_field: 0,
        origin_timestamp: SimTime::from_ms(125),
        domain_number: 0,
    };
    let sync_frame = EthernetFrame::new(
        GPTP_MULTICAST_MAC,
        MacAddr::local(1),
        None,
        ETHERTYPE_GPTP,
        encode_gptp(&sync),
    )
    .unwrap();
    println!("gptp_sync_untagged {}", hex(&encode_frame(&sync_frame)));

    let fup = GptpMessage {
        message_type: GptpMessageType::FollowUp,
        sequence_id: 5,
        correction_field: 2_499_852i64 << 16,
        origin_timestamp: SimTime::from_ms(125),
        domain_number: 0,
    };
    let fup_frame = EthernetFrame::new(
        GPTP_MULTICAST_MAC,
        MacAddr::local(1),
        None,
        ETHERTYPE_GPTP,
        encode_gptp(&fup),
    )
    .unwrap();
    println!(
        "gptp_follow_up_corrected {}",
        hex(&encode_frame(&fup_frame))
    );

    let data = EthernetFrame::new(
        MacAddr([0x02, 0, 0, 0, 1, 0]),
        MacAddr::local(1),
        Some(VlanTag::new(6, false, 100).unwrap()),
        0x88B5,
        vec![0xA5; 16],
    )
    .unwrap();
    println!("data_pcp6_vid100 {}", hex(&encode_frame(&data)));

    let untagged = EthernetFrame::new(
        MacAddr([0x02, 0, 0, 0, 1, 0]),
        MacAddr::local(1),
        None,
        0x88B5,
        vec![0x5A; 8],
    )
    .unwrap();
    println!("data_untagged {}", hex(&encode_frame(&untagged)));

    let wrapped = wrap_residence(&encode_frame(&sync_frame), SimTime::from_ns(125_002_928), 1);
    let dgram = CoreDatagram::new(
        0x0A000002,
        0x0A000101,
        0,
        CoreProtocol::Udp {
            src_port: GPTP_UDP_PORT,
            dst_port: GPTP_UDP_PORT,
        },
        wrapped,
    )
    .unwrap();
    println!("datagram_gptp_wrapped {}", hex(&encode_datagram(&dgram)));

    let raw =
        CoreDatagram::new(0x0A000002, 0x0A000101, 6, CoreProtocol::Raw, vec![0x11; 12]).unwrap();
    println!("datagram_raw_dscp6 {}", hex(&encode_datagram(&raw)));

    let tunneled = encode_tunnel(&GtpuHeader::new(2049, 6).unwrap(), &encode_datagram(&raw));
    println!("gtpu_teid2049_qfi6 {}", hex(&tunneled));
}
