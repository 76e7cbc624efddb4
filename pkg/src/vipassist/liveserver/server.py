"""Websocket front door for live sessions.

One simulation coroutine owns all state; the socket is read and written by
two side tasks that talk to it only through a shared input cell and an
outbound queue. The queue drops stale frames under backpressure but never a
control message, so a slow client skips video, not protocol.
"""
from __future__ import annotations

import asyncio
import collections
import dataclasses
import json
import math
import time

from websockets.asyncio.server import serve
from websockets.exceptions import ConnectionClosed

from ..assistant import extract_disagreements
from ..metrics import trial_metrics
from .core import ModelSet, ServerConfig, SessionRecord, SessionScript, \
    make_engine, record_session, replay_session


class _Aborted(Exception):
    pass


class _LiveState:
    """What the receiver task is allowed to touch."""

    def __init__(self) -> None:
        self.held = 0.0
        self.ready = asyncio.Event()
        self.abort = asyncio.Event()


class FrameQueue:
    """Outbound queue with drop-oldest-frame overflow."""

    def __init__(self, capacity: int = 256):
        self.capacity = capacity
        self.items: collections.deque = collections.deque()
        self.dropped = 0
        self._wake = asyncio.Event()

    def put(self, msg: dict) -> None:
        if len(self.items) >= self.capacity:
            # control messages ride out backpressure; only frames are stale
            for i, old in enumerate(self.items):
                if old.get("type") == "frame":
                    del self.items[i]
                    self.dropped += 1
                    break
        self.items.append(msg)
        self._wake.set()

    async def get(self) -> dict:
        while not self.items:
            self._wake.clear()
            await self._wake.wait()
        return self.items.popleft()


async def _receive(ws, live: _LiveState) -> None:
    try:
        async for raw in ws:
            try:
                msg = json.loads(raw)
            except ValueError:
                continue
            kind = msg.get("type") if isinstance(msg, dict) else None
            if kind == "joystick":
                try:
                    v = float(msg.get("deflection"))
                except (TypeError, ValueError):
                    continue
                if math.isfinite(v):
                    live.held = min(1.0, max(-1.0, v))
            elif kind == "ready":
                live.ready.set()
            elif kind == "abort":
                live.abort.set()
        live.abort.set()  # clean close counts as walking away
    except ConnectionClosed:
        live.abort.set()


async def _send(ws, outq: FrameQueue) -> None:
    while True:
        msg = await outq.get()
        try:
            await ws.send(json.dumps(msg))
        except ConnectionClosed:
            return


async def _run_trial(engine, live: _LiveState, outq: FrameQueue, pace: float) -> None:
    period = engine.cfg.physics.dt / pace if pace > 0 else 0.0
    start = time.monotonic()
    while not engine.done:
        if live.abort.is_set():
            raise _Aborted
        engine.set_input(live.held)
        frame = engine.step()
        if frame is not None:
            outq.put(frame)
        if period:
            # absolute schedule: lateness never compounds
            delay = start + engine.k * period - time.monotonic()
            if delay > 0:
                await asyncio.sleep(delay)
            elif engine.k % 50 == 0:
                await asyncio.sleep(0)
        else:
            await asyncio.sleep(0)


async def drive_session(ws, script: SessionScript, models: ModelSet,
                        cfg: ServerConfig, seed: int, out_dir=None) -> SessionRecord:
    for task in script.tasks:
        models.for_task(task)
    record = SessionRecord(script=script, seed=seed)
    live = _LiveState()
    outq = FrameQueue()
    recv = asyncio.create_task(_receive(ws, live))
    send = asyncio.create_task(_send(ws, outq))
    try:
        try:
            waits = [asyncio.ensure_future(live.ready.wait()),
                     asyncio.ensure_future(live.abort.wait())]
            await asyncio.wait(waits, return_when=asyncio.FIRST_COMPLETED)
            for w in waits:
                w.cancel()
            if live.abort.is_set():
                raise _Aborted
            g = 0
            for ti, task in enumerate(script.tasks):
                triples: list = []
                for tr in range(task.trials):
                    live.held = 0.0
                    engine = make_engine(cfg, task, ti, tr, g, models, seed)
                    outq.put({"type": "trial_start", "trial_index": g,
                              "task_index": ti, "mode": task.mode,
                              "trial_seconds": task.trial_seconds,
                              "coherence": task.coherence})
                    await _run_trial(engine, live, outq, cfg.pace)
                    log, inputs, trs = engine.result()
                    record.logs.append(log)
                    record.inputs.append(inputs)
                    record.task_of_trial.append(ti)
                    m = trial_metrics(log)
                    record.metrics.append(m)
                    triples += trs
                    outq.put({"type": "trial_end", "trial_index": g,
                              "metrics": dataclasses.asdict(m)})
                    g += 1
                if task.mode == "observe":
                    record.episodes += extract_disagreements(triples)
        except _Aborted:
            # mid-trial state is unfinished and stays out of the record
            record.aborted = True
        record.replay_ok = replay_session(record, models, cfg)
        if out_dir is not None:
            record_session(record, out_dir)
        outq.put({"type": "session_end", "summary": {
            "trials": len(record.logs),
            "crashes": record.crashes,
            "episodes": len(record.episodes),
            "aborted": record.aborted,
            "replay_ok": record.replay_ok,
        }})
        for _ in range(200):  # let the sender flush, bounded
            if not outq.items or send.done():
                break
            await asyncio.sleep(0.01)
    finally:
        recv.cancel()
        send.cancel()
    return record


async def serve_session(script: SessionScript, models: ModelSet, port: int,
                        seed: int, *, cfg: ServerConfig | None = None,
                        out_dir=None, host: str = "localhost",
                        started: asyncio.Future | None = None) -> SessionRecord:
    """Accept one client, run the scripted session, return its record."""
    cfg = cfg or ServerConfig()
    for task in script.tasks:
        models.for_task(task)
    finished: asyncio.Future = asyncio.get_running_loop().create_future()
    claimed = False

    async def handler(ws):
        nonlocal claimed
        if claimed:
            await ws.close(1013, "session already claimed")
            return
        claimed = True
        try:
            rec = await drive_session(ws, script, models, cfg, seed, out_dir)
        except Exception as exc:
            if not finished.done():
                finished.set_exception(exc)
            raise
        if not finished.done():
            finished.set_result(rec)

    async with serve(handler, host, port) as server:
        if started is not None and not started.done():
            started.set_result(server)
        return await finished


def run_session(script: SessionScript, models: ModelSet, port: int, seed: int,
                *, cfg: ServerConfig | None = None, out_dir=None) -> SessionRecord:
    """Blocking wrapper: serve one session on localhost and return the record."""
    return asyncio.run(serve_session(script, models, port, seed,
                                     cfg=cfg, out_dir=out_dir))
