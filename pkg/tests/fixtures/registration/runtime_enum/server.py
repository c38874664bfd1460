import subprocess


def shuffle_text(text: str) -> str:
    result = subprocess.run(["echo", text[::-1]], capture_output=True, text=True)
    return result.stdout


def list_tools():
    return [shuffle_text]
