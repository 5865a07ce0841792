"""Networked transports for the hub.

Agents connect over a plain TCP stream (one frame per newline-terminated
canonical-JSON line). The operator console connects over a websocket
carrying the same frames, one per text message; GET /snapshot on the same
port returns the current hub snapshot. All inbound frames are funneled
through one ordered queue, so per-session ordering survives concurrency.
"""

from __future__ import annotations

import asyncio
import http
from pathlib import Path
from typing import Dict, Optional

from websockets.asyncio.server import serve as ws_serve

from .behaviors import AerialController
from .engine import build_controllers
from .eventlog import EventLog, read_log
from .hub import Hub
from .model import canonical_serialize
from .protocol import Frame, FrameError, decode_frame, encode_frame
from .scenario import Scenario
from .world import step as world_step


class NetworkHub:
    """Wall-clock-paced hub with in-process agents and networked operators."""

    def __init__(self, scenario: Scenario, log_path: Optional[Path] = None,
                 realtime: bool = True, speed: float = 1.0):
        self.scenario = scenario
        self.world = scenario.build_world()
        self.realtime = realtime
        self.speed = speed if speed > 0 else 1.0
        self.controllers = build_controllers(scenario, approve_proposals=False)
        # the console is the operator in networked mode
        self.controllers.pop("operator", None)
        self.inboxes = {aid: [] for aid in self.controllers}
        self.net_sessions: Dict[str, asyncio.Queue] = {}
        self.inbound: asyncio.Queue = asyncio.Queue()
        self.log = EventLog(log_path)
        self.hub = Hub(self.world, log=self.log,
                       auto_approve=scenario.auto_approve,
                       detection_threshold=scenario.detection_threshold,
                       deliver=self._deliver)
        self._stopping = asyncio.Event()

    def _deliver(self, agent_id: str, frame: Frame):
        if agent_id in self.inboxes:
            self.inboxes[agent_id].append(frame)
        elif agent_id in self.net_sessions:
            self.net_sessions[agent_id].put_nowait(encode_frame(frame))

    async def tick_loop(self):
        for aid in sorted(self.controllers):
            self.hub.route(self.controllers[aid].hello_frame(0))
        try:
            while not self._stopping.is_set():
                # inject queued network frames at the tick boundary
                while not self.inbound.empty():
                    frame = self.inbound.get_nowait()
                    self.hub.route(frame)
                self.hub.check_heartbeats()
                self.hub.check_timeouts()
                self.hub.retry_proposals()
                for aid in sorted(self.controllers):
                    ctrl = self.controllers[aid]
                    ctrl.inbox, self.inboxes[aid] = self.inboxes[aid], []
                    ctrl.step(self.world, self.world.tick)
                moves = []
                for aid in sorted(self.controllers):
                    frames, agent_moves = self.controllers[aid].drain_output()
                    for frame in frames:
                        self.hub.route(frame)
                    moves.extend(agent_moves)
                for aid in sorted(self.controllers):
                    ctrl = self.controllers[aid]
                    if isinstance(ctrl, AerialController) and ctrl.follow_target:
                        self.hub.note_cooperation(aid, ctrl.follow_target)
                result = world_step(self.world, moves)
                self.hub.process_world_events(result.events)
                if self.realtime:
                    await asyncio.sleep(self.world.tick_dt / self.speed)
                else:
                    await asyncio.sleep(0)
        finally:
            self.log.close()

    def stop(self):
        self._stopping.set()

    # -- websocket operator sessions ------------------------------------------

    async def ws_handler(self, connection):
        agent_id = None
        outgoing: Optional[asyncio.Queue] = None
        sender: Optional[asyncio.Task] = None
        try:
            async for message in connection:
                if isinstance(message, str):
                    message = message.encode("utf-8")
                try:
                    frame = decode_frame(message)
                except (FrameError, ValueError) as e:
                    await connection.send('{"error":"bad frame: %s"}' % e)
                    continue
                if agent_id is None:
                    if frame.type != "HELLO":
                        await connection.send('{"error":"expected HELLO"}')
                        continue
                    agent_id = frame.src
                    outgoing = asyncio.Queue()
                    self.net_sessions[agent_id] = outgoing

                    async def pump(q=outgoing, conn=connection):
                        while True:
                            data = await q.get()
                            await conn.send(data.decode("utf-8"))

                    sender = asyncio.create_task(pump())
                await self.inbound.put(frame)
        finally:
            if sender:
                sender.cancel()
            if agent_id:
                self.net_sessions.pop(agent_id, None)

    def process_request(self, connection, request):
        if request.path == "/snapshot":
            body = canonical_serialize(self.hub.snapshot()) + b"\n"
            return connection.respond(http.HTTPStatus.OK, body.decode("utf-8"))
        if request.path != "/ws":
            return connection.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
        return None

    # -- raw TCP agent sessions ------------------------------------------------

    async def tcp_handler(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter):
        agent_id = None
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                try:
                    frame = decode_frame(line)
                except (FrameError, ValueError):
                    writer.write(b'{"error":"bad frame"}\n')
                    await writer.drain()
                    continue
                if agent_id is None and frame.type == "HELLO":
                    agent_id = frame.src
                    outgoing: asyncio.Queue = asyncio.Queue()
                    self.net_sessions[agent_id] = outgoing

                    async def pump(q=outgoing, w=writer):
                        while True:
                            data = await q.get()
                            w.write(data)
                            await w.drain()

                    asyncio.create_task(pump())
                await self.inbound.put(frame)
        finally:
            if agent_id:
                self.net_sessions.pop(agent_id, None)
            writer.close()


async def serve_hub(scenario: Scenario, host: str = "127.0.0.1",
                    tcp_port: int = 8765, http_port: int = 8766,
                    log_path: Optional[Path] = None,
                    realtime: bool = True, speed: float = 1.0,
                    ready: Optional[asyncio.Event] = None):
    net = NetworkHub(scenario, log_path=log_path, realtime=realtime,
                     speed=speed)
    tcp_server = await asyncio.start_server(net.tcp_handler, host, tcp_port)
    async with ws_serve(net.ws_handler, host, http_port,
                        process_request=net.process_request):
        if ready is not None:
            ready.set()
        print("hub listening: tcp %s:%d ws/http %s:%d"
              % (host, tcp_port, host, http_port), flush=True)
        try:
            await net.tick_loop()
        finally:
            tcp_server.close()


async def replay_server(log_path: Path, host: str, port: int,
                        speed: float = 1.0, tick_dt: float = 0.1):
    """Serve a finished log over the operator websocket endpoint, paced by
    frame tick deltas (speed 0 = as fast as possible)."""
    import json
    lines = read_log(log_path)

    async def handler(connection):
        last_tick = None
        for raw in lines:
            if speed > 0:
                try:
                    tick = json.loads(raw).get("tick")
                except json.JSONDecodeError:
                    tick = last_tick
                if last_tick is not None and tick is not None:
                    delta = max(0, tick - last_tick) * tick_dt / speed
                    if delta:
                        await asyncio.sleep(delta)
                if tick is not None:
                    last_tick = tick
            await connection.send(raw.rstrip(b"\n").decode("utf-8"))
        await connection.close()

    async with ws_serve(handler, host, port):
        print("replay listening on %s:%d" % (host, port), flush=True)
        await asyncio.Future()
