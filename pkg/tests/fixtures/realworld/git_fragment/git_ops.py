from typing import List
import subprocess


def _run_git_command(repo_path: str, command: List[str]) -> str:
    full_command = ["git"] + command
    result = subprocess.run(
        full_command, cwd=repo_path,
        check=True, capture_output=True, text=True)
    return result.stdout
