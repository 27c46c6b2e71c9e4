"""Entry point for one socket-backend worker process.

Usage: python -m blockgp.transport.socket_worker PORT RANK D SEED
"""

import queue
import socket
import sys
import threading

from ..grid import ProcessGrid
from .base import Message, WorkerCore
from .wire import decode_body, encode_control, encode_data, read_frame


def main(argv=None):
    port, rank, D, seed = map(int, (argv or sys.argv[1:])[:4])
    grid = ProcessGrid(D)
    sock = socket.create_connection(("127.0.0.1", port))
    wlock = threading.Lock()

    def write(frame):
        with wlock:
            sock.sendall(frame)

    core = WorkerCore(rank, grid, seed,
                      send_fn=lambda dst, tag, payload:
                      write(encode_data(rank, dst, core.epoch, tag, payload)))
    core.abort_fn = lambda: write(encode_control(
        {"kind": "abort", "src": rank, "epoch": core.epoch}))
    write(encode_control({"kind": "hello", "rank": rank}))

    cmds = queue.SimpleQueue()

    def reader():
        try:
            while True:
                body = read_frame(sock)
                if body is None:
                    cmds.put(("shutdown",))
                    return
                decoded = decode_body(body)
                if decoded[0] == "data":
                    _, src, _dst, epoch, tag, payload = decoded
                    core.mailbox.put(Message(src=src, dst=rank, tag=tag,
                                             payload=payload, epoch=epoch))
                else:
                    obj = decoded[1]
                    if obj["kind"] == "command":
                        cmds.put(obj["cmd"])
                    elif obj["kind"] == "abort":
                        core.mailbox.put(Message(src=obj["src"], dst=rank,
                                                 tag=None, epoch=obj["epoch"],
                                                 kind="abort"))
        except (ConnectionError, OSError):
            cmds.put(("shutdown",))

    threading.Thread(target=reader, daemon=True).start()

    while True:
        cmd = cmds.get()
        if cmd[0] == "shutdown":
            sock.close()
            return 0
        result = core.handle(cmd)
        write(encode_control({"kind": "result", "rank": rank, "value": result}))


if __name__ == "__main__":
    sys.exit(main())
