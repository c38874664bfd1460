import socket

from toolkit.core import Server

server = Server("net-tools")


def send_ping(host: str) -> bool:
    sock = socket.create_connection((host, 7), timeout=2)
    sock.close()
    return True


server.register_tool(send_ping)
