import asyncio
import json

from websockets.asyncio.client import connect
from websockets.asyncio.server import serve as ws_serve

from fleettwin.cli import resolve_scenario
from fleettwin.net import NetworkHub
from fleettwin.protocol import Frame, decode_frame, encode_frame
from fleettwin.scenario import load_scenario


class OperatorClient:
    """Minimal operator-console stand-in over the websocket endpoint."""

    def __init__(self, ws):
        self.ws = ws
        self.seq = 0

    async def send(self, type_, payload, dst="hub"):
        self.seq += 1
        frame = Frame(type_, self.seq, 0, "operator", dst, payload)
        await self.ws.send(encode_frame(frame).decode("utf-8"))

    async def recv(self, timeout=60):
        msg = await asyncio.wait_for(self.ws.recv(), timeout)
        if isinstance(msg, str):
            msg = msg.encode("utf-8")
        return decode_frame(msg)

    async def recv_until(self, pred, timeout=60):
        while True:
            frame = await self.recv(timeout)
            if pred(frame):
                return frame


async def fetch_snapshot(port):
    reader, writer = await asyncio.open_connection("127.0.0.1", port)
    writer.write(b"GET /snapshot HTTP/1.1\r\nHost: localhost\r\n"
                 b"Connection: close\r\n\r\n")
    await writer.drain()
    status = await asyncio.wait_for(reader.readline(), 10)
    assert b"200" in status
    length = None
    while True:
        line = await asyncio.wait_for(reader.readline(), 10)
        if line in (b"\r\n", b"\n", b""):
            break
        if line.lower().startswith(b"content-length:"):
            length = int(line.split(b":")[1])
    body = await asyncio.wait_for(
        reader.readexactly(length) if length else reader.read(), 10)
    writer.close()
    return json.loads(body)


async def _exercise():
    scenario = load_scenario(resolve_scenario("m3"))
    net = NetworkHub(scenario, realtime=False)
    async with ws_serve(net.ws_handler, "127.0.0.1", 0,
                        process_request=net.process_request) as server:
        port = server.sockets[0].getsockname()[1]
        ticker = asyncio.create_task(net.tick_loop())
        try:
            async with connect("ws://127.0.0.1:%d/ws" % port) as ws:
                op = OperatorClient(ws)
                await op.send("HELLO", {"agent_id": "operator",
                                        "kind": "operator"})
                welcome = await op.recv()
                assert welcome.type == "WELCOME"
                assert welcome.payload["detection_threshold"] == 0.6

                command = await op.recv()
                assert command.type == "COMMAND"

                proposal = await op.recv_until(
                    lambda f: f.type == "EVENT"
                    and f.payload.get("event") == "collaboration_proposal")
                assert proposal.payload["feasible"]

                await op.send("MISSION_TRIGGER", {
                    "mission_type": "M3",
                    "beneficiary": proposal.payload["beneficiary"],
                    "approval_of": proposal.payload["proposal_id"]})
                done = await op.recv_until(
                    lambda f: f.type == "MISSION_STATUS"
                    and f.payload["state"] == "Completed")
                assert done.payload["mission_type"] == "M3"

                snap = await fetch_snapshot(port)
                assert snap["tick"] > 0
                agents = {s["agent_id"] for s in snap["sessions"]}
                assert {"spot", "husky", "operator"} <= agents
                assert snap["missions"][0]["state"] == "Completed"
        finally:
            net.stop()
            ticker.cancel()


def test_networked_hub_end_to_end():
    asyncio.run(_exercise())
